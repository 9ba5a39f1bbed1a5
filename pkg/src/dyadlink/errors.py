"""Exception hierarchy shared across the package.

Exit-code contract for the CLI: usage errors exit 2, data errors exit 3,
numerical failures exit 4.
"""


class DyadlinkError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DataError(DyadlinkError):
    exit_code = 3


class NumericalError(DyadlinkError):
    exit_code = 4


# --- indexing / algebra ---

class IdentityPair(DataError):
    """Self-loop pair (i, i) where an ordered pair i != j is required."""


class NodeOutOfRange(DataError):
    """Node id outside 1..n."""


class IndexOutOfRange(DataError):
    """Parameter index outside 1..2n-1."""


class DimensionMismatch(DataError):
    """Vector/matrix shape inconsistent with the pair layout."""


# --- smoothing ---

class EmptyCell(NumericalError):
    """No data pair matches the discrete cell within the kernel window."""


class AllCellsEmpty(NumericalError):
    """Every candidate bandwidth failed to produce valid density estimates."""


class NonPositiveDensity(NumericalError):
    """Density value below the configured floor reached the transform."""


# --- estimation ---

class AmbiguousSpecialRegressor(NumericalError):
    """Edge counts show no monotone trend along the candidate regressor."""


class SingularDesign(NumericalError):
    """Z' D Z is (numerically) singular; projection estimate undefined."""


class IsolatedNodes(DataError):
    """Nodes with zero in-degree or zero out-degree present."""


# --- weighted networks ---

class UnknownLevelValue(DataError):
    """An edge weight does not match any declared level value."""


class LevelCollapse(DataError):
    """A declared level has no observations anywhere in the network."""


# --- inference ---

class GroupTooSmall(DataError):
    """Heterogeneity test group needs at least two nodes."""


class EmptyReference(DataError):
    """Similarity measure needs a nonempty reference support."""


# --- I/O ---

class ParseError(DataError):
    """An input file failed to parse; the message carries path:line."""


class DuplicatePair(DataError):
    """The same ordered pair appears twice in an input file."""


class SelfLoop(DataError):
    """An input row has i == j."""


class MissingPair(DataError):
    """A pair present in the edge data has no covariate row."""


class UnknownColumn(DataError):
    """A declared column name does not exist in the input."""
