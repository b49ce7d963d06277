"""Baseband Volterra models of all-digital transmitters, with identification and predistortion."""

from .signals import (RateConfig, SampledSignal, AlignmentResult, gen_stimulus, nmse_db,
                      align_gain_delay, apply_alignment, band_extract_demod)
from .encoders import EncoderConfig, encode, encode_detailed
from .chain import CtKernelSpec, simulate_reference, chain_from_xd
from .model import (MonomialSpec, MonomialBasis, FirBankModel, enumerate_monomials,
                    eval_monomials, model_forward, save_model, load_model)
from .identification import FitConfig, FitReport, fit_model, validate
from .dpd import Compensator, fit_compensator, eval_compensated, make_chain

__version__ = "0.1.0"
