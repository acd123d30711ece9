from lesionforge.review.sets import (
    CandidateImage,
    ReviewPlan,
    ReviewSet,
    build_review_sets,
    load_plan,
    save_plan,
)
from lesionforge.review.store import RankingRecord, RankingStore
from lesionforge.review.report import rankings_report, report_text
from lesionforge.review.service import create_app

__all__ = [
    "CandidateImage",
    "RankingRecord",
    "RankingStore",
    "ReviewPlan",
    "ReviewSet",
    "build_review_sets",
    "create_app",
    "load_plan",
    "rankings_report",
    "report_text",
    "save_plan",
]
