from .model import (
    ArchConfig,
    BatchPoint,
    LgnModel,
    batch_gradients,
    build_pyramid,
    encode_relation,
    load_model,
    nll,
    predict,
    roi_pool,
    save_model,
)
from .synth import AnnotatedPoint, random_world_map, synthesize_stage1, synthesize_stage2
from .train import TrainConfig, train_curriculum, train_stage
