from .export import ExportError, IMAGENET_MEANS, VGG19_LAYERS, export, main

__all__ = ["ExportError", "IMAGENET_MEANS", "VGG19_LAYERS", "export", "main"]
