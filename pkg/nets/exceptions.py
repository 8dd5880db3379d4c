class ArchitectureError(ValueError):
    """Несовместимые архитектуры сетей (обнаруживается при построении)"""


class DecoupledError(RuntimeError):
    """Совместный прямой проход после отсоединения студента"""
