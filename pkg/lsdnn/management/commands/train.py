"""
Обучение конвейера LS-DNN: стадия 1 (DNN-L, DNN-H и линейный базовый
реконструктор) и стадия 2 (DNN-S). Результат - каталог checkpoint/.
"""
import logging

from lsdnn.exceptions import InputMismatchError
from lsdnn.management.commands._base import PipelineCommand
from lsdnn.services.pipeline import STAGE1, STAGE2, LsdnnPipeline, PipelineCheckpoint, split_indices
from lsdnn.services.plots import plot_loss_curves
from optics.services.datasets import MANIFEST_NAME, DatasetService
from optics.utils.files import atomic_write_text, ensure_empty_dir

logger = logging.getLogger('lsdnn')


class Command(PipelineCommand):
    help = 'Обучает DNN-L/DNN-H (стадия 1) и DNN-S (стадия 2)'
    command_name = 'train'

    def add_command_arguments(self, parser):
        parser.add_argument('--stage', choices=['all', '1', '2'], default='all',
                            help='Какие стадии обучать (2 - только DNN-S поверх готовых L и H)')
        parser.add_argument('--sequential', action='store_true',
                            help='Обучать DNN-L и DNN-H последовательно')

    def load_pairs(self):
        self.require_path(self.stage_dir('dataset') / MANIFEST_NAME, 'gen_dataset')
        self.require_path(self.stage_dir('measurements') / MANIFEST_NAME, 'simulate')
        objects = DatasetService.open(self.stage_dir('dataset')).load_all()
        measurements = DatasetService.open(self.stage_dir('measurements')).load_all()
        if len(objects) != len(measurements):
            raise InputMismatchError(
                f"{len(measurements)} measurements for {len(objects)} dataset objects"
            )
        return measurements, objects

    def write_history(self, ckpt_dir, label, history):
        path = atomic_write_text(ckpt_dir / f"loss_{label}.csv", history.to_csv())
        self.written(path, stage=label)

    def run(self, config, options):
        measurements, objects = self.load_pairs()
        ckpt_dir = self.stage_dir('checkpoint')
        stage = options['stage']
        histories = {}

        if stage in ('all', '1'):
            ensure_empty_dir(ckpt_dir, force=options['force'])
            training = config.training_settings()
            split = split_indices(len(objects), training.seed)
            self.ledger.stage('stage1', train=len(split[0]), val=len(split[1]))
            checkpoint, stage1 = LsdnnPipeline.train_stage1(
                measurements, objects, config.forward_config(), config.cleaned_data['p'],
                training, split=split, parallel=not options["sequential"],
                wiener_eps=config.cleaned_data["wiener_eps"],
            )
            checkpoint.save(ckpt_dir, labels=list(STAGE1) + ["W"])
            for label, history in stage1.items():
                self.write_history(ckpt_dir, label, history)
                histories[label] = history
            self.ledger.stage('stage1', finished=True,
                              val_npcc_L=stage1["L"].final_val_npcc,
                              val_npcc_H=stage1["H"].final_val_npcc)
        else:
            self.require_path(ckpt_dir / MANIFEST_NAME, 'train --stage 1')
            checkpoint = PipelineCheckpoint.load(ckpt_dir)
            checkpoint.require(*STAGE1)

        if stage in ('all', '2'):
            self.ledger.stage('stage2')
            history = LsdnnPipeline.train_stage2(checkpoint, measurements, objects)
            checkpoint.save(ckpt_dir, labels=list(STAGE2))
            self.write_history(ckpt_dir, "S", history)
            histories["S"] = history
            self.ledger.stage('stage2', finished=True, val_npcc_S=history.final_val_npcc)

        if histories:
            plot = plot_loss_curves(
                {f"DNN-{label}": history for label, history in histories.items()},
                ckpt_dir / f"loss_stage{stage}.png",
            )
            self.written(plot)
        self.written(ckpt_dir)
