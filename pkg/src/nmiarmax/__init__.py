"""Information-guided ARMAX identification of indoor thermal dynamics."""

from ._version import __version__
from .dataset import ColumnRole, SplitSpec, TimeSeriesTable, load_csv, split, split_tests, standardize
from .errors import (
    ConfigError,
    DataError,
    DegenerateEntropyError,
    DivergenceError,
    NmiArmaxError,
    NumericalError,
    RankDeficientError,
)
from .infotheory import (
    DependencyMatrix,
    SymbolSequence,
    dependency_matrix,
    entropy,
    mutual_information,
    nmi_sqrt,
    rank_inputs,
    symbolize,
)
from .linmodels import (
    FitOptions,
    FitReport,
    PolyModel,
    build_regressors,
    check_stability,
    fit_armax,
    fit_arx,
    model_fit,
    predict_one_step,
    simulate,
)
from .statespace import SSModel, fit_ss, from_polymodel, ho_kalman, simulate_ss
