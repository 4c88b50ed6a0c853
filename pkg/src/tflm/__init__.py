"""Tractable fault-localization models over MiniC parse trees.

Parse programs with ``parse_program``, annotate them from coverage with
``corpus.annotate`` (or load a manifest with ``load_corpus``), train with
``learning.train`` and rank lines with ``evaluation.localize``.
"""

from .corpus import AnnotatedProgram, annotate, generate_synthetic_corpus, load_corpus, loop_context_generator
from .errors import TflmError
from .evaluation import cross_validate, fs_score, localize, rank_lines
from .grammar import Grammar, load_grammar, minic_grammar
from .learning import TrainingConfig, hard_em_train, train
from .minic import ParsedProgram, parse_program
from .model import TflmSpec, buggy_posteriors, joint_log_prob, load_spec, map_subclasses, save_spec
from .spectra import CoverageMatrix, sbi_scores, tarantula_scores

__version__ = "0.1.0"
