from .schema import ReasoningSample, SampleError, read_samples, write_samples
from .synth import (DEFAULT_PALETTE, QUESTION_KINDS, GridConfig, GridConfigError, draw_grid, generate_grid_task,
                    majority_color, neighbourhood_crop, stage_mixture)
from .judges import (ExternalJudge, JudgeError, JudgeRequest, always_wrong_judge, aux_focus_judge,
                     canvas_text_judge, majority_color_judge, oracle_judge)
from .filters import (UPPER_MODES, FilterReport, aspect_ok, filter_aspect_ratio, filter_lower_bound,
                      filter_upper_bound, normalize_answer, run_filter_pipeline)
