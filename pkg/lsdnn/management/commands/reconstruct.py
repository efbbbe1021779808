"""
Инференс обученного конвейера: recon/ с f̂_LF, f̂_HF, f̂ и линейным
базовым результатом для каждого тестового измерения.
"""
import logging

from lsdnn.exceptions import InputMismatchError
from lsdnn.management.commands._base import PipelineCommand
from lsdnn.services.artifacts import write_reconstruction_set
from lsdnn.services.pipeline import LsdnnPipeline, PipelineCheckpoint
from optics.services.datasets import MANIFEST_NAME, DatasetService
from optics.utils.files import ensure_empty_dir

logger = logging.getLogger('lsdnn')


class Command(PipelineCommand):
    help = 'Восстанавливает изображения по измерениям (по умолчанию - валидационная часть)'
    command_name = 'reconstruct'

    def add_command_arguments(self, parser):
        parser.add_argument('--split', choices=['val', 'train', 'all'], default='val',
                            help='Какие измерения восстанавливать')

    def run(self, config, options):
        ckpt_dir = self.stage_dir('checkpoint')
        self.require_path(ckpt_dir / MANIFEST_NAME, 'train')
        self.require_path(self.stage_dir('dataset') / MANIFEST_NAME, 'gen_dataset')
        self.require_path(self.stage_dir('measurements') / MANIFEST_NAME, 'simulate')
        checkpoint = PipelineCheckpoint.load(ckpt_dir)
        checkpoint.require('L', 'H', 'S')

        dataset = DatasetService.open(self.stage_dir('dataset'))
        measurements = DatasetService.open(self.stage_dir('measurements'))
        split = options['split']
        if split == 'val':
            indices = checkpoint.val_indices
        elif split == 'train':
            indices = checkpoint.train_indices
        else:
            indices = list(range(len(measurements)))

        out = ensure_empty_dir(self.stage_dir('recon'), force=options['force'])
        self.ledger.stage('reconstruct', count=len(indices))
        if indices and max(indices) >= min(len(measurements), len(dataset)):
            raise InputMismatchError(
                f"checkpoint split refers to index {max(indices)}, but only "
                f"{len(measurements)} measurements and {len(dataset)} objects exist"
            )
        g = [measurements.load(i) for i in indices]
        f = [dataset.load(i) for i in indices]
        n = checkpoint.forward.n
        for i, img in zip(indices, g):
            if img.shape != (n, n):
                raise InputMismatchError(f"measurement {i}: grid {img.shape} does not match checkpoint n={n}")
        results = LsdnnPipeline.reconstruct_batch(checkpoint, g)
        write_reconstruction_set(
            out, indices, f, g, results,
            extra={'split': split, 'checkpoint': str(ckpt_dir), 'kind': checkpoint.forward.kind},
        )
        self.ledger.stage('reconstruct', finished=True)
        self.written(out)
