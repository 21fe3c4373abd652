"""Inputs behind the frozen prompt goldens in ``revbrowse/fixtures/prompts``."""

from revbrowse.extraction import UserPreferences, render_item_feature_prompt, render_user_pref_prompt
from revbrowse.ranker import Candidate, CandidateSlate, render_recommendation_prompt
from revbrowse.synthetic import fixture_path

HISTORY = ["Crunchy Granola Bites", "Spicy Noodle Cup"]
PREFS = UserPreferences("u1", ("crisp bites",), ("fiery heat",))
SLATE = CandidateSlate(
    (
        Candidate("B1", "Honey Oat Clusters", ("crunchy texture", "sweet flavor"), ()),
        Candidate("B2", "Ghost Pepper Chips", ("crunchy texture",), ("spicy kick",)),
    )
)

REC_VARIANTS = {
    "rec_prompt_1.txt": (True, True),
    "rec_prompt_no_pref.txt": (False, True),
    "rec_prompt_no_reviews.txt": (True, False),
    "rec_prompt_no_pref_no_reviews.txt": (False, False),
}


def rendered():
    """``{golden file name: freshly rendered text}``."""
    out = {
        "user_prompt_1.txt": render_user_pref_prompt([("Crunchy Granola Bites", "Loved how crunchy it is.", 5)]),
        "user_prompt_2.txt": render_user_pref_prompt(
            [("Crunchy Granola Bites", "Loved how crunchy it is.", 5), ("Spicy Noodle Cup", "Too spicy for me.", 2)]
        ),
        "item_prompt_1.txt": render_item_feature_prompt(
            ("Crunchy Granola Bites", 'Great crunch, but the bag arrived "crushed".', 4)
        ),
    }
    for name, (prefs, feats) in REC_VARIANTS.items():
        out[name] = render_recommendation_prompt(HISTORY, PREFS, SLATE, prefs, feats)
    return out


def golden(name):
    return fixture_path("prompts", name).read_text(encoding="utf-8")
