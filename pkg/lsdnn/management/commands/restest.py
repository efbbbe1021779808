"""
Тест разрешения: ряд точек с шагом D проходит через прямую модель
и конвейер; для каждой стадии считается dip_ratio.
"""
import logging

from lsdnn.management.commands._base import PipelineCommand
from lsdnn.services.evaluation import make_dot_pattern, resolve_test, restest_csv
from lsdnn.services.pipeline import LsdnnPipeline, PipelineCheckpoint
from lsdnn.services.plots import plot_restest
from optics.services.datasets import MANIFEST_NAME
from optics.services.forward import ForwardKind, simulate
from optics.utils.files import atomic_write_text, ensure_empty_dir

logger = logging.getLogger('lsdnn')


class Command(PipelineCommand):
    help = 'Проверяет, разрешает ли каждая стадия соседние точки'
    command_name = 'restest'

    def run(self, config, options):
        data = config.cleaned_data
        ckpt_dir = self.stage_dir('checkpoint')
        self.require_path(ckpt_dir / MANIFEST_NAME, 'train')
        checkpoint = PipelineCheckpoint.load(ckpt_dir)
        checkpoint.require('L', 'H', 'S')
        cfg = checkpoint.forward

        pattern = make_dot_pattern(cfg.n, data['dot_spacing'], data['dot_count'])
        f = pattern.raster(pitch=cfg.pitch)
        if cfg.kind == ForwardKind.QPR:
            f = f.with_data(f.data * data['phi_max'])
        g = simulate(f, cfg)

        out = ensure_empty_dir(self.stage_dir('restest'), force=options['force'])
        self.ledger.stage('restest')
        rec = LsdnnPipeline.reconstruct(g, checkpoint)
        stages = {"gt": f, "meas": g, "lf": rec.f_lf, "hf": rec.f_hf, "shat": rec.f_hat}
        if rec.wiener is not None:
            stages["wiener"] = rec.wiener
        results = {stage: resolve_test(img, pattern) for stage, img in stages.items()}
        for stage, result in results.items():
            if result.diagnostic:
                logger.info(f"restest {stage}: dip_ratio n/a ({result.diagnostic})")
                continue
            verdict = "resolved" if result.resolved else "unresolved"
            logger.info(f"restest {stage}: dip_ratio={result.dip_ratio:.4f} ({verdict})")

        b = cfg.b if cfg.kind == ForwardKind.DLI else None
        csv_path = atomic_write_text(out / 'restest.csv', restest_csv(pattern, results, b))
        self.written(csv_path, stage='restest')
        self.written(plot_restest(pattern, results, out / 'restest.png'), stage='restest')
        self.ledger.stage('restest', finished=True,
                          dip_ratio={stage: r.dip_ratio for stage, r in results.items()})
