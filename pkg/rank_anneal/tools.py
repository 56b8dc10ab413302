# Response shaping for the results service

from typing import Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict
from pydantic.alias_generators import to_camel

DEFAULT_PAGE_SIZE = 20  # Default number of items per page


class CamelModel(BaseModel):
    """Response model whose JSON keys are camelCase."""

    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True, frozen=True)

    def to_response(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


def paginate_results(page: Optional[int], items: Sequence[CamelModel]) -> Tuple[Optional[int], int, list]:
    """Slice one page out of ``items``.

    Args:
        page: Page number (None returns all results)
        items: Every matching item, already in display order

    Returns:
        Tuple of (page, total_docs, serialized results)
    """
    total_docs = 0
    if page is None:
        selected = items
    else:
        total_docs = len(items)
        page = max(page, 1)
        skip = (page - 1) * DEFAULT_PAGE_SIZE
        selected = items[skip:skip + DEFAULT_PAGE_SIZE]
    return page, total_docs, [item.to_response() for item in selected]


def create_paginate_response(page: Optional[int], items: Sequence[CamelModel]) -> dict:
    """Pagination envelope around one page of ``items``."""
    page, total_docs, results = paginate_results(page, items)
    return {
        "page": page,
        "pageSize": DEFAULT_PAGE_SIZE,
        "totalPages": -(-total_docs // DEFAULT_PAGE_SIZE) if page else 1,
        "totalDocs": total_docs if page else len(results),
        "results": results,
    }
