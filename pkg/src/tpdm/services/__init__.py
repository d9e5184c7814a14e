"""Data services run by the provider on encrypted submissions, and the
consumer-side checks of their outcomes."""
from .fitting import (
    FitCheckPlan, FitReport, GaussianFit, calibrate_refit_threshold, encode_profile_fitting,
    fitting_schema, gaussian_kl, plaintext_fit, run_fitting, verify_fitting_outcome,
)
from .matching import (
    MatchingQuery, MatchOutcome, MatchReport, cheap_similarity, encode_profile_matching,
    make_query, matching_schema, plaintext_matches, run_matching, similarity,
    verify_matching_outcome,
)
from .sampling import SamplePlan, checks_for, detection_probability
from .schema import Schema, SchemaError
