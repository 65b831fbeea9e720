"""Error taxonomy shared across the package.

All numerical-domain failures derive from :class:`KerrHeraldError` so the
command line interface can map them onto a single exit code; configuration
schema problems get their own branch.
"""


class KerrHeraldError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidDimensionError(KerrHeraldError, ValueError):
    """A Fock cutoff or index is out of range."""


class DimensionMismatchError(KerrHeraldError, ValueError):
    """Operands live on different truncated spaces."""


class UndefinedStateError(KerrHeraldError, ValueError):
    """The requested state does not exist (for example an odd cat at alpha=0)."""


class TruncationDomainError(KerrHeraldError, ValueError):
    """A phase-space query lies outside the trustworthy domain of the cutoff."""


class DegenerateSteadyStateError(KerrHeraldError, RuntimeError):
    """The Liouvillian null space is not one dimensional."""


class ConvergenceError(KerrHeraldError, RuntimeError):
    """A headline quantity drifts too much when the cutoff is enlarged."""


class SolverError(KerrHeraldError, RuntimeError):
    """A linear-algebra routine failed to reach its residual target."""


class ExceptionalPointError(KerrHeraldError, RuntimeError):
    """The eigenvector basis is too ill conditioned to be trusted."""


class DegenerateTopError(KerrHeraldError, RuntimeError):
    """The dominant eigenvalue is degenerate; carries the offending subspace.

    Attributes
    ----------
    eigenvalue : complex
        The (shared) dominant eigenvalue.
    subspace : numpy.ndarray
        Columns spanning the degenerate eigenspace.
    """

    def __init__(self, message, eigenvalue=None, subspace=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.subspace = subspace


class MissingParityStructureError(KerrHeraldError, RuntimeError):
    """Parity-resolved rates requested but the spectrum carries no parity labels."""


class NotPositiveSemidefiniteError(KerrHeraldError, RuntimeError):
    """A candidate density matrix has negative eigenvalues beyond tolerance."""


class NonNormalizableError(KerrHeraldError, RuntimeError):
    """No trace-class candidate exists among the dominant eigenmatrices."""


class PureUnravelingError(KerrHeraldError, ValueError):
    """The pure-state unraveling was requested outside eta=1, n_th=0; use the
    density-matrix unraveling instead."""


class TraceCollapseError(KerrHeraldError, RuntimeError):
    """The unnormalized conditional state lost essentially all of its trace."""


class InsufficientDecayError(KerrHeraldError, RuntimeError):
    """No inter-jump segment exhibits enough decay to fit a rate."""


class EmptyAdmissibleSetError(KerrHeraldError, RuntimeError):
    """A constrained sweep found no point satisfying the admissibility rule."""


class GridMismatchError(KerrHeraldError, ValueError):
    """Trajectories sampled on different time grids cannot be averaged."""


class ConfigSchemaError(KerrHeraldError, ValueError):
    """A run configuration violates the schema (unknown key, bad type, bad range)."""


class TruncationWarning(UserWarning):
    """An amplitude is large enough that the Fock cutoff may bite."""
