"""Exception hierarchy shared by all storystream modules.

Exit-code mapping used by the CLI: validation problems exit 1, input/IO
problems exit 2, broken internal invariants exit 3.
"""


class StoryStreamError(Exception):
    exit_code = 3


class ValidationError(StoryStreamError):
    """Bad configuration value or a violated call contract."""

    exit_code = 1


class InputError(StoryStreamError):
    """Missing, unreadable or malformed input data."""

    exit_code = 2


class InvariantError(StoryStreamError):
    """An internal consistency check failed; indicates a bug."""

    exit_code = 3


class CorpusParseError(InputError):
    """A corpus line could not be turned into a document."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DegenerateDataError(ValidationError):
    """The provided data cannot support the requested computation."""


class SequencingError(ValidationError):
    """Stream batches were fed out of order."""


class UndefinedModularityError(ValidationError):
    """Modularity is undefined for a graph with zero total edge weight."""


class ConsistencyError(InvariantError):
    """Topic membership disagrees with the documents fed to the batch."""


class MissingEmbeddingError(InputError):
    """A story member has no vector in the embedding store."""

    def __init__(self, doc_id: str):
        super().__init__(f"no embedding vector for document {doc_id!r}")
        self.doc_id = doc_id


class DocumentSetMismatchError(ValidationError):
    """Predicted and gold clusterings cover different documents."""

    def __init__(self, only_pred, only_gold):
        self.only_pred = sorted(only_pred)
        self.only_gold = sorted(only_gold)
        parts = []
        if self.only_pred:
            parts.append(f"only in prediction: {_preview(self.only_pred)}")
        if self.only_gold:
            parts.append(f"only in gold: {_preview(self.only_gold)}")
        super().__init__("document sets differ; " + "; ".join(parts))


def _preview(ids, limit: int = 5) -> str:
    shown = ", ".join(repr(i) for i in ids[:limit])
    if len(ids) > limit:
        shown += f", ... ({len(ids)} total)"
    return shown
