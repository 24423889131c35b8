"""Occupancy estimation from indoor CO2 by time series decomposition."""

from .decomp import ComponentSet, Method, StlParams, decompose, decompose_std, decompose_stl, henderson, loess
from .errors import (AperiodicError, CdhocError, CollinearityError, ConstantOccupancyError,
                     DegenerateNeighborhoodError, GapTooLongError, ModelError, NoVarianceError,
                     VacantWindowError, ValidationError)
from .gas_sim import (OccupantProfile, Occupancy, Preset, RoomModel, Schedule, SensorNoise, exhalation_rate,
                      preset, simulate)
from .harness import EvalConfig, EvalReport, accuracy_with_tolerance, incremental_splits, run_benchmark
from .io import (RunConfig, ingest_csv, load_config, load_model, parse_config, read_schedule, save_model,
                 write_schedule)
from .kernels import BACKEND
from .lag import LagFit, RoomGeometry, fit_line, nrmse, select_lag, upper_bound_lag
from .models import (PolyModel, SeasonalMap, SeasonalMotif, VacantWindow, align_motifs, correlate_trend,
                     dtw_cost, dtw_similarity, find_repeated_sequence, fit_poly_m5, learn_zpa)
from .predictor import OccupancyModel, PredictionResult, TrainConfig, predict, reconstruct, train
from .series import AlignedPair, SampledSeries, Unit, fill_gaps, resample, shift_and_trim
from .svr import SvrModel, fit_svr, predict_svr

__version__ = "0.1.0"
