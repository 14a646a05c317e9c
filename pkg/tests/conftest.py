import importlib.resources

import pytest

from promptforge.agents import ScenarioContext
from promptforge.cot import PromptKind
from promptforge.gateway import MockProvider, ScriptedTranscript


FIXTURE_2048 = str(
    importlib.resources.files("promptforge.fixtures").joinpath("transcript_2048.json")
)


def mock(*entries):
    """MockProvider over ("hint", "response") pairs; "*" matches anything."""
    return MockProvider(ScriptedTranscript(entries=list(entries)))


@pytest.fixture
def user_ctx():
    return ScenarioContext(
        team_intro="Team intro.",
        scenario_description="Refining a user prompt for a small game.",
        prompt_kind=PromptKind.USER,
        initial_prompt="I want a 2048 game",
    )


@pytest.fixture
def system_ctx():
    return ScenarioContext(
        team_intro="Team intro.",
        scenario_description="Refining an agent system prompt.",
        prompt_kind=PromptKind.SYSTEM,
        initial_prompt="You are a product manager agent.",
    )
