class NonFiniteError(ValueError):
    """Нечисловое значение (nan/inf) в отношении вероятностей или плотности"""

    def __init__(self, what, index):
        self.what = what
        self.index = int(index)
        super().__init__(f"{what}: нечисловое значение в позиции {self.index}")
