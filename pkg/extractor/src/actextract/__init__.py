"""actextract: dump torch layer activations into the actsketch file format."""

from .binfmt import write_activation_file
from .extract import (ExtractionSpec, LayerNotFoundError, extract, list_layers,
                      load_model, load_samples, resolve_layer)

__version__ = "0.1.0"
