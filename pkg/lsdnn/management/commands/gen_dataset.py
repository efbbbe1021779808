"""
Генерация набора объектов: синтетические поля 1/f² или внешние PNG.

Пример:
    python manage.py gen_dataset --out runs/dli --seed 7 --set count=200
"""
import logging
from pathlib import Path

from lsdnn.management.commands._base import PipelineCommand
from optics.services.datasets import LUMA_WEIGHTS, DatasetService
from optics.services.forward import ForwardKind
from optics.utils.files import ensure_empty_dir

logger = logging.getLogger('lsdnn')


class Command(PipelineCommand):
    help = 'Создает набор объектов dataset/ (obj_NNNN.fras + manifest.txt)'
    command_name = 'gen_dataset'

    def run(self, config, options):
        data = config.cleaned_data
        kind = data['kind']
        if data['source'] and not any(Path(data['source']).glob('*.png')):
            raise FileNotFoundError(f"no PNG files found in {data['source']}")
        out = ensure_empty_dir(self.stage_dir('dataset'), force=options['force'])
        manifest = {
            'kind': kind,
            'n': data['n'],
            'seed': data['seed'],
            'pitch': repr(data['pitch']),
        }
        if kind == ForwardKind.QPR:
            manifest['phi_max'] = repr(data['phi_max'])

        self.ledger.stage('dataset')
        if data['source']:
            objects = DatasetService.ingest_png(
                data['source'], data['n'], kind, phi_max=data['phi_max'], pitch=data['pitch'],
            )
            manifest['generator'] = 'png'
            manifest['source'] = data['source']
            manifest['luma_weights'] = ",".join(str(w) for w in LUMA_WEIGHTS)
        else:
            objects = DatasetService.synthesize(
                data['count'], data['n'], data['seed'], kind,
                phi_max=data['phi_max'], pitch=data['pitch'],
            )
            manifest['generator'] = 'power_law_1_over_f2'
        dataset = DatasetService.write(objects, out, manifest)
        self.ledger.stage('dataset', finished=True, count=len(dataset))
        self.written(out)
