"""Exception types shared across the package."""

from __future__ import annotations


class TwinrelayError(Exception):
    """Base class for package errors."""


class ValidationError(TwinrelayError, ValueError):
    """A parameter or configuration is outside its documented domain."""


class DimensionMismatchError(ValidationError):
    """A vector has the wrong length for the lattice it is used with."""


class GuardExceededError(TwinrelayError):
    """A desk-scale enumeration guard (codebook or pair count) was exceeded."""


class ScheduleError(TwinrelayError):
    """A multi-hop schedule produced an unsolvable decode."""


class DirectionCollisionError(TwinrelayError):
    """Two distinct sum points share a direction, so angle decoding is ambiguous."""
