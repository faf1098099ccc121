"""
Exceptions raised by the simulation library
"""


class HidimError(Exception):
    def __init__(self, *args):
        self.args = args

    def __str__(self):
        message = self.args[0] if self.args else None
        if message:
            return f'{self.__class__.__name__}: {message}'
        return f'{self.__class__.__name__}: the operation failed'


class DomainError(HidimError):
    """An input lies outside the domain of the operation"""


class DimensionMismatchError(DomainError):
    pass


class DegenerateModelError(DomainError):
    """The two class conditionals coincide (alpha == 0)"""


class NotPSDError(DomainError):
    pass


class UntrainableError(HidimError):
    """The training set cannot support the requested rule, e.g. a class is absent"""


class InvalidPlanError(HidimError):
    pass


class InsufficientTrialsError(HidimError):
    pass
