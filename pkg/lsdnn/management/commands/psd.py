"""
Сравнение диагональных PSD ансамблей реконструкций с эталоном: psd/.
"""
import logging

from lsdnn.management.commands._base import PipelineCommand
from lsdnn.services.artifacts import load_reconstruction_set
from lsdnn.services.evaluation import compare_psd, write_psd_comparison
from lsdnn.services.plots import plot_psd_comparison
from optics.utils.files import ensure_empty_dir

logger = logging.getLogger('lsdnn')

# Метки каталога recon/ -> колонки psd_compare.csv
COLUMN_FOR_LABEL = {
    "gt": "gt",
    "meas": "meas",
    "lf": "lf",
    "hf": "hf",
    "fhat": "shat",
    "wiener": "wiener",
}


class Command(PipelineCommand):
    help = 'Строит и сравнивает PSD ансамблей (psd_compare.csv, psd_bands.csv, PNG)'
    command_name = 'psd'

    def run(self, config, options):
        recon = load_reconstruction_set(self.stage_dir('recon'))
        out = ensure_empty_dir(self.stage_dir('psd'), force=options['force'])
        self.ledger.stage('psd')
        ensembles = {COLUMN_FOR_LABEL[label]: images for label, images in recon.images.items()}
        comparison = compare_psd(ensembles)
        for path in write_psd_comparison(comparison, out):
            self.written(path, stage='psd')
        self.written(plot_psd_comparison(comparison, out / 'psd_compare.png'), stage='psd')
        self.ledger.stage('psd', finished=True,
                          top_distance={label: bands['top'] for label, bands in comparison.distances.items()})
