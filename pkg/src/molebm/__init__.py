"""Energy-based generative modelling of molecular graphs."""

__version__ = "0.1.0"

from .canon import canonical_key
from .checkpoint import load_checkpoint, save_checkpoint
from .energy import EnergyModel, energy_forward, energy_grad_inputs, energy_grad_params, init_params
from .graph import QM9_VOCAB, ZINC_VOCAB, AtomVocab, DenseGraphTensor, Dims, MolecularGraph, encode_one_hot
from .langevin import CompositeEnergy, LangevinConfig
from .metrics import constrained_eval, evaluate_set
from .pipeline import compose, generate, optimize_from
from .smiles import parse_smiles_lite, write_smiles_lite
from .training import TrainConfig, batch_loss, fit

__all__ = [
    "AtomVocab", "CompositeEnergy", "DenseGraphTensor", "Dims", "EnergyModel", "LangevinConfig",
    "MolecularGraph", "TrainConfig", "batch_loss", "canonical_key", "compose", "constrained_eval",
    "encode_one_hot", "energy_forward", "energy_grad_inputs", "energy_grad_params", "evaluate_set",
    "fit", "generate", "init_params", "load_checkpoint", "optimize_from", "parse_smiles_lite",
    "save_checkpoint", "write_smiles_lite", "QM9_VOCAB", "ZINC_VOCAB",
]
