"""Error type shared by all embedder operations."""


class EmbedError(ValueError):
    """Invalid input: corpus documents, audio files, job settings, or a
    missing optional extractor. The CLI maps this to exit code 2."""
