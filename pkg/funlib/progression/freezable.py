import numpy as np


class Freezable(object):
    """Base for value objects that become immutable once constructed.

    Subclasses assign their attributes in ``__init__`` and finish with
    ``self.freeze()``. Afterwards, assigning or deleting any attribute raises
    ``TypeError`` and every numpy array attribute is flagged read-only, so
    frozen objects can be shared between worker threads.
    """

    __isfrozen = False

    def __setattr__(self, key, value):
        if self.__isfrozen:
            raise TypeError("%r is frozen, you can't set %s on it" % (self, key))
        object.__setattr__(self, key, value)

    def __delattr__(self, key):
        if self.__isfrozen:
            raise TypeError("%r is frozen, you can't delete %s from it" % (self, key))
        object.__delattr__(self, key)

    def freeze(self):
        for value in vars(self).values():
            if isinstance(value, np.ndarray):
                value.flags.writeable = False
        self.__isfrozen = True

    @property
    def frozen(self) -> bool:
        return self.__isfrozen
