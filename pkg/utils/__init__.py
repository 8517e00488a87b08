from .metrics import StageTimer
