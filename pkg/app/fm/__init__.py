"""
Simulation-free flow and score matching for OU-reference Schrödinger bridges.
"""

from .networks import FeedForwardNet, AdamW
from .loss import FlowBatch, LossResult, cfm_loss, conditional_targets, regression_loss, score_weights
from .checkpoint import Checkpoint, sb_drift
from .trainer import TrainConfig, Segment, prepare_segments, train

__all__ = [
    'FeedForwardNet',
    'AdamW',
    'FlowBatch',
    'LossResult',
    'cfm_loss',
    'conditional_targets',
    'regression_loss',
    'score_weights',
    'Checkpoint',
    'sb_drift',
    'TrainConfig',
    'Segment',
    'prepare_segments',
    'train',
]
