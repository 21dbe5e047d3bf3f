"""Figure rendering for gmm-feedback experiment results."""

from .render import FigureSpec, RenderError, load_curves, render_ccdf, render_trace
