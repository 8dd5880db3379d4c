class UnknownEnvError(KeyError):
    """Идентификатор среды отсутствует в реестре"""

    def __init__(self, env_id, known):
        self.env_id = env_id
        self.known = list(known)
        super().__init__(env_id)

    def __str__(self):
        return f"Неизвестная среда {self.env_id!r}. Доступны: {', '.join(self.known)}"


class EpisodeFinishedError(RuntimeError):
    """Шаг после окончания эпизода"""
