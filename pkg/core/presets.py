"""
Analytic presets for the right-hand side f, boundary data g and background v^b
"""

import logging

import numpy as np

from .errors import ConfigError

logger = logging.getLogger('corrugate.presets')


def constant(value=1.0):
    value = float(value)

    def func(x):
        return np.full(x.shape[1:], value)
    return func


def gaussian_bump(amplitude=1.0, center=None, width=0.2, offset=0.0):
    """amplitude·exp(-|x-center|²/width²) + offset"""
    amplitude, width, offset = float(amplitude), float(width), float(offset)
    if width <= 0:
        raise ConfigError(f"gaussian-bump width must be positive, got {width}", key='width')

    def func(x):
        c = np.zeros(x.shape[0]) if center is None else np.asarray(center, dtype=float)
        r2 = sum((x[k] - c[k]) ** 2 for k in range(x.shape[0]))
        return amplitude * np.exp(-r2 / width ** 2) + offset
    return func


def polynomial(terms):
    """
    Sum of monomials

    Args:
        terms (list): (coefficient, powers) pairs, e.g. [(1.0, (2, 0)), (-1.0, (0, 2))]
    """
    terms = [(float(c), tuple(int(p) for p in powers)) for c, powers in terms]

    def func(x):
        out = np.zeros(x.shape[1:])
        for coeff, powers in terms:
            if len(powers) > x.shape[0]:
                raise ConfigError(f"Monomial {powers} has more variables than the dimension {x.shape[0]}")
            term = np.full(x.shape[1:], coeff)
            for k, p in enumerate(powers):
                if p:
                    term = term * x[k] ** p
            out = out + term
        return out
    return func


def trigonometric(amplitude=1.0, frequency=1.0, phase=0.0, offset=0.0):
    """amplitude·Π_k cos(2π·frequency·x_k + phase) + offset"""
    amplitude, frequency, phase, offset = float(amplitude), float(frequency), float(phase), float(offset)

    def func(x):
        out = np.full(x.shape[1:], amplitude)
        for k in range(x.shape[0]):
            out = out * np.cos(2.0 * np.pi * frequency * x[k] + phase)
        return out + offset
    return func


def parse_terms(text):
    """
    Parse monomials written as 'coeff:p1,p2;coeff:p1,p2'

    Args:
        text (str): Term list, e.g. '0.5:2,0;0.5:0,2'

    Returns:
        list: (coefficient, powers) pairs
    """
    terms = []
    for chunk in str(text).split(';'):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            coeff, powers = chunk.split(':')
            terms.append((float(coeff), tuple(int(p) for p in powers.split(','))))
        except ValueError:
            raise ConfigError(f"Bad polynomial term '{chunk}', expected 'coeff:p1,p2,...'", key='terms')
    if not terms:
        raise ConfigError("Polynomial preset needs at least one term", key='terms')
    return terms


def _parse_center(text):
    if text is None:
        return None
    return [float(c) for c in str(text).split(',')]


PRESETS = ('constant', 'gaussian-bump', 'polynomial', 'trigonometric', 'zero')


def make_preset(kind, params=None):
    """
    Build an analytic function of coordinates (n, ...) from a preset name

    Args:
        kind (str): One of PRESETS
        params (dict, optional): Preset parameters as read from the configuration

    Returns:
        callable: Function of a coordinate array
    """
    params = dict(params or {})
    try:
        if kind == 'zero':
            return constant(0.0)
        if kind == 'constant':
            return constant(params.get('value', 1.0))
        if kind == 'gaussian-bump':
            return gaussian_bump(params.get('amplitude', 1.0), _parse_center(params.get('center')),
                                 params.get('width', 0.2), params.get('offset', 0.0))
        if kind == 'polynomial':
            terms = params.get('terms')
            if isinstance(terms, str) or terms is None:
                terms = parse_terms(terms or '')
            return polynomial(terms)
        if kind == 'trigonometric':
            return trigonometric(params.get('amplitude', 1.0), params.get('frequency', 1.0),
                                 params.get('phase', 0.0), params.get('offset', 0.0))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Bad parameters for preset '{kind}': {e}")
    raise ConfigError(f"Unknown preset '{kind}', expected one of {', '.join(PRESETS)}", key='kind')
