from .sequence import Batch, Example, SequenceError, TrainingSequence, build_sequence, collate, prompt_entries
from .losses import LossReport, align_loss, shifted_ce
from .data import STAGE_SOURCES, build_tokenizer, compute_targets, evidence_image, prepare_examples, problem_features
from .loop import (TF_MODES, CurriculumPlan, Diverged, Interrupted, NonFiniteLoss, StagePlan, Trainer, TrainingError,
                   make_optimizer, plan_from_dict, plan_to_dict, predict_latents, replay_inputs, run_curriculum,
                   training_step)
