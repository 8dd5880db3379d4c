class ShapeError(ValueError):
    """Несовместимые формы входов операции"""

    def __init__(self, op, left, right=None):
        self.op = op
        self.shapes = (list(left), None if right is None else list(right))
        if right is None:
            message = f"{op}: недопустимая форма {list(left)}"
        else:
            message = f"{op}: формы {list(left)} и {list(right)} несовместимы"
        super().__init__(message)


class GraphError(ValueError):
    """Ошибка использования графа вычислений"""


class FrozenGroupError(ValueError):
    """Попытка обновить замороженную группу параметров"""
