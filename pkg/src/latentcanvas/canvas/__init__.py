from .types import STRATEGIES, AuxiliaryImage, Box, Canvas, ReasoningBlock, RenderConfig, RenderInputError
from .raster import highlight_regions, read_ppm, write_png, write_ppm
from .layout import (choose_font, column_widths, fixed_image_size, line_advance, measure_text, render,
                     render_compact_lr, render_fixed_wrap, render_vertical, trace_text, wrap_fixed)
from .ocr import read_canvas_text
from .export import load_canvas, save_canvas
