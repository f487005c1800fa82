from .reports_exporter import ReportsExporter
from .config import RunConfig
from .enums import MollifierKind, MomentMethod

__all__ = ["ReportsExporter", "RunConfig", "MollifierKind", "MomentMethod"]
