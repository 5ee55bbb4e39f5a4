"""Fast template correlation via synthesized shift-add multiplication plans."""
from .bench import BaselineCosts, bench_sweep, direct_cost, viterbi_alpha
from .classify import (ClassificationEvent, classify, classify_signal, correlation, detect_events,
                       distance, gen_test_signal)
from .cost import CostPolicy, CostTally
from .errors import InputError, InvariantError
from .execute import EvalResult, direct_multiply, evaluate_plan, verify_equivalence
from .plan import (MultiplicationPlan, cse_pass, naive_plan, plan_cost, plan_from_json, plan_to_json,
                   prune, synthesize_plan)
from .quantize import (QuantizedMatrix, QuantizedScalar, normalize_rows, quantize, quantize_templates,
                       to_scaled_integers)
from .stream import StreamState, stream_cost_summary, stream_init, stream_push, window_norm

__version__ = "0.1.0"
