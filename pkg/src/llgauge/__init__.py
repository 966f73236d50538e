"""llgauge: a desk-scale laboratory for the planar isotropic Landau-Lifshitz
flow, its gauge-equivalent Schrodinger-type system, the SU(2) frame bridge
between them, and finite-time H^3 growth diagnostics."""

__version__ = "0.1.0"

from .errors import (CompatibilityError, ConfigError, DomainCoverageError,
                     ExtrapolationError, GaugeExtractionError, HorizonError,
                     LabError, PoleError, SolverInstabilityError)
from .fields import (PeriodicGrid2D, RadialGrid, RadialProfile, dealias,
                     lift_radial, nonlocal_tail, sobolev_norm,
                     spectral_derivative)
from .ll import (LLSolverConfig, MatrixSpinField, SpinField, from_matrix,
                 ll_residual, ll_rhs, ll_step, run_ll, to_matrix)
from .nls import (DriftParams, RadialRun, SchrodingerState, conservation_report,
                  drift_rhs, radialQQ_rhs, restriction_residual, run_radial,
                  run_system8, system8_rhs, system8_residual, u_from_closure)
from .gauge import (ConnectionCoeffs, GaugeFrame, fields_from_frame,
                    frame_from_fields, frame_from_spin, gauge_roundtrip,
                    h3_lower_bound, spin_from_frame, third_derivative_blocks)
from .analytic import (ConformalFamily, Sl2Params, SolitonParams,
                       TravellingSoliton, WindowedSoliton, ansatz_state,
                       claim3_constant, line_soliton_state, nls_seed,
                       solitary_wave_shoot, soliton_spin)
