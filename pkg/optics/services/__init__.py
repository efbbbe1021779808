# ===============================
# optics/services/__init__.py
# ===============================
from .datasets import DatasetService
from .forward import ForwardConfig, ForwardKind

__all__ = ['DatasetService', 'ForwardConfig', 'ForwardKind']
