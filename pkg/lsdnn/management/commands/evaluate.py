"""
Метрики NPCC/PSNR/SSIM по реконструкциям: eval/metrics.csv (f̂)
и таблицы для DNN-L и линейного реконструктора для сравнения.
"""
import logging

from lsdnn.management.commands._base import PipelineCommand
from lsdnn.services.artifacts import load_reconstruction_set
from lsdnn.services.evaluation import npcc_ceiling, write_metric_report
from lsdnn.services.metrics import MetricReport
from optics.services.forward import ForwardKind, dli_transfer
from optics.services.spectral import ensemble_psd
from optics.utils.files import ensure_empty_dir

logger = logging.getLogger('lsdnn')

REPORTS = (
    ("fhat", "metrics.csv"),
    ("lf", "metrics_lf.csv"),
    ("wiener", "metrics_wiener.csv"),
)


class Command(PipelineCommand):
    help = 'Считает метрики реконструкций относительно эталона'
    command_name = 'evaluate'

    def run(self, config, options):
        recon = load_reconstruction_set(self.stage_dir('recon'))
        if "gt" not in recon.images:
            raise FileNotFoundError("reconstruction set has no ground truth; histogram matching needs it")
        out = ensure_empty_dir(self.stage_dir('eval'), force=options['force'])
        self.ledger.stage('evaluate', count=len(recon))
        for label, filename in REPORTS:
            if label not in recon.images:
                continue
            report = MetricReport()
            for image_id, fhat, f in zip(recon.image_ids(), recon.images[label], recon.images["gt"]):
                report.add(image_id, fhat, f)
            self.written(write_metric_report(report, out / filename), stage='evaluate')
        extra = {}
        data = config.cleaned_data
        if data['kind'] == ForwardKind.DLI and recon.images["gt"]:
            # предел для оценки без априорных знаний о спектре вне полосы tri(bu)·tri(bv)
            n = recon.images["gt"][0].shape[0]
            ceiling = npcc_ceiling(ensemble_psd(recon.images["gt"]), dli_transfer(n, n, data['b']))
            logger.info(f"In-band NPCC ceiling for b={data['b']:g}, n={n}: {ceiling:.4f}")
            extra['npcc_ceiling'] = ceiling
        self.ledger.stage('evaluate', finished=True, **extra)
