"""Evolutionary solver for security games with sensor signalling."""

from ._jit import backend_name
from .evaluation import AdversaryStrategy, EvalReport, evaluate, payoff_against
from .evolve import EvolveParams, SolveResult, run
from .game_model import GameInstance, Graph, TargetUtility, build_uncertainty_matrix, load_game, save_game
from .strategy import Chromosome, PureStrategy

__version__ = "0.1.0"
