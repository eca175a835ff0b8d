"""Figure rendering for envcontours JSON artifacts.

Strictly a consumer of the versioned artifacts written by the analysis
package; no statistics are recomputed here.
"""

from .render import KINDS, RenderError, build_figure, load_artifact, save_figure

__all__ = ["KINDS", "RenderError", "build_figure", "load_artifact", "save_figure"]
