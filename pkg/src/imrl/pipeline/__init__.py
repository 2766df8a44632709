"""End-to-end pipeline: dataset generation, representation pretraining,
behavior cloning, evaluation suites, ablations, and embedding analysis."""
from .dataset import FoodImageDataset, gen_food_dataset, gen_spoon_dataset, shuffle_frames
from .encoder import (Encoder, IntegratedRepresentation, init_encoder,
                      embed_images, encode, save_encoder, load_encoder)
from .training import (train_repr, train_bc, temporal_accuracy, fullness_mae,
                       collect_bc_samples, init_policy, policy_action,
                       PolicyParams)
from .evaluation import (EnvCase, in_distribution_suite, generalization_suite,
                         gen_demos, demo_videos, save_trajectories,
                         load_trajectories, evaluate, sequential_afs,
                         ablation_suite, train_full_pipeline,
                         ABLATION_VARIANTS)
from .analysis import embedding_metrics, tsne_2d

__all__ = [
    "FoodImageDataset", "gen_food_dataset", "gen_spoon_dataset",
    "shuffle_frames", "Encoder", "IntegratedRepresentation", "init_encoder",
    "embed_images", "encode", "save_encoder", "load_encoder", "train_repr",
    "train_bc", "temporal_accuracy", "fullness_mae", "collect_bc_samples",
    "init_policy", "policy_action", "PolicyParams", "EnvCase",
    "in_distribution_suite", "generalization_suite", "gen_demos",
    "demo_videos", "save_trajectories", "load_trajectories", "evaluate",
    "sequential_afs", "ablation_suite", "train_full_pipeline",
    "ABLATION_VARIANTS", "embedding_metrics", "tsne_2d",
]
