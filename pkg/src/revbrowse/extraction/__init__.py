from .cache import ExtractionCache, cache_key
from .extract import Extractor, extract_item_features, extract_user_preferences
from .mock import MockChatClient, mock_extract, mock_extract_preferences
from .parsing import find_json_object, parse_feature_response, parse_preference_response
from .prompts import TEMPLATE_VERSION, render_item_feature_prompt, render_user_pref_prompt
from .records import ItemFeatures, UserPreferences

__all__ = [
    "ExtractionCache",
    "Extractor",
    "ItemFeatures",
    "MockChatClient",
    "TEMPLATE_VERSION",
    "UserPreferences",
    "cache_key",
    "extract_item_features",
    "extract_user_preferences",
    "find_json_object",
    "mock_extract",
    "mock_extract_preferences",
    "parse_feature_response",
    "parse_preference_response",
    "render_item_feature_prompt",
    "render_user_pref_prompt",
]
