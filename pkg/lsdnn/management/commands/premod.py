"""
Предпросмотр предмодуляции целей: premod/premod_NNNN.fras.
"""
import logging

from lsdnn.management.commands._base import PipelineCommand
from optics.services.datasets import MANIFEST_NAME, DatasetService
from optics.services.spectral import premodulate
from optics.utils.files import ensure_empty_dir

logger = logging.getLogger('lsdnn')


class Command(PipelineCommand):
    help = 'Применяет фильтр r^p к объектам набора'
    command_name = 'premod'

    def run(self, config, options):
        p = config.cleaned_data['p']
        self.require_path(self.stage_dir('dataset') / MANIFEST_NAME, 'gen_dataset')
        dataset = DatasetService.open(self.stage_dir('dataset'))
        out = ensure_empty_dir(self.stage_dir('premod'), force=options['force'])
        self.ledger.stage('premod')
        modulated = [premodulate(obj, p) for obj in dataset.load_all()]
        DatasetService.write(
            modulated, out,
            {'p': repr(float(p)), 'objects': ",".join(dataset.names)},
            pattern="premod_{index:04d}.fras",
        )
        logger.info(f"Premodulated {len(modulated)} objects with p={p}")
        self.ledger.stage('premod', finished=True, count=len(modulated))
        self.written(out)
