"""
Exception hierarchy for the AU detection pipeline
Ієрархія винятків для pipeline детекції AU

Усі класи наслідують ValueError (або FloatingPointError), тому
код, що ловить стандартні винятки, продовжує працювати.
"""


class DimensionError(ValueError):
    """Порушення контракту форм / розмірів тензорів"""


class ConfigError(ValueError):
    """Невалідна або суперечлива конфігурація"""


class DegenerateScaleError(ValueError):
    """Нульова міжочна відстань (збіг внутрішніх кутиків очей)"""


class ManifestError(ValueError):
    """Проблема з маніфестом датасету або CSV файлами"""


class NonFiniteGradientError(FloatingPointError):
    """NaN / inf у градієнтах перед кроком оптимізатора"""

    def __init__(self, message: str, offending: list = None):
        super().__init__(message)
        self.offending = offending or []
