class ConfigError(ValueError):
    """Ошибка файла конфигурации или переопределений командной строки"""


class UnknownRecipeError(KeyError):
    def __init__(self, name, known):
        self.name = name
        self.known = sorted(known)
        super().__init__(name)

    def __str__(self):
        return f"Неизвестный рецепт {self.name!r}; доступны: {', '.join(self.known)}"
