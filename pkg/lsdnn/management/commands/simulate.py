"""
Прямая модель для каждого объекта набора: measurements/meas_NNNN.fras.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

from django.conf import settings

from lsdnn.exceptions import InputMismatchError
from lsdnn.management.commands._base import PipelineCommand
from lsdnn.services.plots import spectrum_preview
from optics.services.datasets import MANIFEST_NAME, DatasetService
from optics.services.forward import ForwardKind, qpr_background, simulate
from optics.utils.files import atomic_write_text, ensure_empty_dir, format_key_value

logger = logging.getLogger('lsdnn')

MEASUREMENT_PATTERN = "meas_{index:04d}.fras"


class Command(PipelineCommand):
    help = 'Симулирует измерения (DLI или QPR) для набора dataset/'
    command_name = 'simulate'

    def run(self, config, options):
        cfg = config.forward_config()
        self.require_path(self.stage_dir('dataset') / MANIFEST_NAME, 'gen_dataset')
        dataset = DatasetService.open(self.stage_dir('dataset'))
        objects = dataset.load_all()
        for name, obj in zip(dataset.names, objects):
            if obj.shape != (cfg.n, cfg.n):
                raise InputMismatchError(
                    f"{name}: grid {obj.shape} does not match configured n={cfg.n}"
                )

        out = ensure_empty_dir(self.stage_dir('measurements'), force=options['force'])
        self.ledger.stage('simulate')
        background = qpr_background(cfg) if cfg.kind == ForwardKind.QPR else None
        with ThreadPoolExecutor(max_workers=settings.FREQSYNTH_THREADS) as executor:
            measurements = list(executor.map(lambda f: simulate(f, cfg, background), objects))

        manifest = {
            'kind': cfg.kind,
            'n': cfg.n,
            'b': repr(cfg.b),
            'wavelength': repr(cfg.wavelength),
            'z': repr(cfg.z),
            'pitch': repr(cfg.pitch),
            'resample': cfg.resample,
            'normalized': int(cfg.kind == ForwardKind.QPR),
            'objects': ",".join(dataset.names),
        }
        written = DatasetService.write(measurements, out, manifest, pattern=MEASUREMENT_PATTERN)
        preview = spectrum_preview(objects[0], measurements[0], out / 'spectra.png')
        self.ledger.stage('simulate', finished=True, count=len(written))
        self.written(out)
        self.written(preview)
