from .degrade import DEGRADATIONS, degrade_gaussian_blur, degrade_jpeg
from .harness import SCENARIOS, TABLE_COLUMNS, ManifestItem, MetricReport, evaluate, load_manifest
from .metrics import PSNR_CAP, psnr, ssim
from .plugins import PluginRegistry, plugin_metric, registry

__all__ = [
    "DEGRADATIONS", "degrade_gaussian_blur", "degrade_jpeg", "SCENARIOS", "TABLE_COLUMNS",
    "ManifestItem", "MetricReport", "evaluate", "load_manifest", "PSNR_CAP", "psnr", "ssim",
    "PluginRegistry", "plugin_metric", "registry",
]
