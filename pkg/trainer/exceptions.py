class CheckpointError(ValueError):
    """Ошибка чтения или проверки чекпойнта"""


class CheckpointVersionError(CheckpointError):
    """Неподдерживаемая версия формата"""


class CheckpointCorruptError(CheckpointError):
    """Файл повреждён или не является чекпойнтом"""


class CheckpointDimError(CheckpointError):
    """Размерности не совпадают с архитектурой или средой"""


class CheckpointGroupError(CheckpointError):
    """Неизвестная или отсутствующая группа параметров"""


class DivergenceError(RuntimeError):
    """Нечисловое значение функции потерь во время обучения"""
