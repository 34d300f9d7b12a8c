"""echofoundry: echo-imaging pipelines on a self-distilled ViT backbone."""

__version__ = "0.1.0"
