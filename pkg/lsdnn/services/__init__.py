# ===============================
# lsdnn/services/__init__.py
# ===============================
from .pipeline import LsdnnPipeline, PipelineCheckpoint
from .training import NetworkTrainer, TrainingSettings
from .unet import MicroUNet, MicroUNetConfig

__all__ = ['LsdnnPipeline', 'PipelineCheckpoint', 'NetworkTrainer', 'TrainingSettings',
           'MicroUNet', 'MicroUNetConfig']
