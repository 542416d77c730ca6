import logging
import sys

import numpy as np


ec3Logger = logging.getLogger("ec3py")

ufstring = "%(name)-3s: [%(levelname)-9s] %(asctime)s %(message)s"

ec3_sh = logging.StreamHandler(stream=sys.stderr)
# create formatter and add it to the handlers
formatter = logging.Formatter(ufstring)
ec3_sh.setFormatter(formatter)
# add the handler to the logger
ec3Logger.addHandler(ec3_sh)
ec3Logger.setLevel(20)
ec3Logger.propagate = False

mylog = ec3Logger


def set_log_level(level):
    """
    Set the level of the ec3py logger. *level* may be an integer
    or one of the standard level names, e.g. "warning".
    """
    if isinstance(level, str):
        level = getattr(logging, level.upper())
    ec3Logger.setLevel(level)


def ensure_list(obj):
    """
    This function ensures that *obj* is a list.  Typically used to convert a
    scalar or a tuple of rates, seeds or paths given by a user to a list.
    """
    if obj is None:
        return [obj]
    if isinstance(obj, (tuple, np.ndarray)):
        return list(obj)
    if not isinstance(obj, list):
        return [obj]
    return obj


def ensure_numpy_array(obj):
    """
    This function ensures that *obj* is a numpy array. Typically used to
    convert scalar, list or tuple arguments (bits, samples, actions).
    """
    if isinstance(obj, np.ndarray):
        if obj.shape == ():
            return np.array([obj])
        # We cast to ndarray to catch ndarray subclasses
        return np.array(obj)
    elif isinstance(obj, (list, tuple)):
        return np.asarray(obj)
    else:
        return np.asarray([obj])


def index_bits(n):
    """
    Number of bits needed to write any of *n* distinct values,
    never less than one.
    """
    return max(1, int(np.ceil(np.log2(n))))


def int_to_bits(value, width):
    """
    Big-endian binary expansion of a non-negative integer *value*
    in exactly *width* bits.
    """
    value = int(value)
    if value < 0 or value >= 2**width:
        raise ValueError(f"{value} does not fit in {width} bits!")
    return np.array([(value >> (width-1-i)) & 1 for i in range(width)],
                    dtype=np.int8)


def bits_to_int(bits):
    """
    Inverse of :func:`int_to_bits`.
    """
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value
