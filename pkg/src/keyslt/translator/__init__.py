from .checkpoint import load_checkpoint, save_checkpoint
from .model import (
    EOS,
    PAD,
    SOS,
    UNK,
    Batch,
    ModelHyper,
    attention_weights,
    backward,
    context_vector,
    decoder_step,
    encode,
    forward_loss,
    greedy_decode,
    gru_cell_forward,
    init_params,
    loss_and_grads,
    make_batch,
    param_shapes,
    reverse_frames,
    zero_params,
)
from .optim import AdamState, adam_step
from .train import TrainConfig, train
