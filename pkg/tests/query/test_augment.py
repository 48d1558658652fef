import itertools

import pytest

from hybridrag.base.aliases import AliasStore
from hybridrag.config import PipelineConfig
from hybridrag.exceptions import InvalidQuery, TokenBudgetUnsatisfiable
from hybridrag.query.augment import (
    DECOMPOSE_SYSTEM_PROMPT,
    ENTITIES_SYSTEM_PROMPT,
    AugmentedQuery,
    Entity,
    IntentCues,
    RawQuery,
    WhIntent,
    augment,
    decompose_query,
    detect_intent,
    expand_acronyms,
    extract_entities,
    fit_token_budget,
    rule_entities,
    substitute_canonicals,
    synthesize_wh,
)
from hybridrag.utils import count_tokens


def test_raw_query():
    with pytest.raises(InvalidQuery):
        RawQuery("   ")
    assert RawQuery("Where?").id == RawQuery("Where?").id
    assert RawQuery("Where?", id="q1").id == "q1"


def test_augmented_query_invariants():
    q = RawQuery("x")
    with pytest.raises(InvalidQuery, match="more than 40"):
        AugmentedQuery(q, " ".join(["word"] * 41))
    with pytest.raises(InvalidQuery, match="lost the entities"):
        AugmentedQuery(q, "Where was he born?", (Entity("Einstein", "Albert Einstein"),))


def test_intent_cues_exclusive():
    with pytest.raises(ValueError):
        IntentCues(temporal=True, factual=True)


def test_decompose_single_clause(mock_gateway):
    q = RawQuery("Where was Albert Einstein born?")
    assert decompose_query(q, mock_gateway) == [q.text]


def test_decompose_with_fixture(mock_gateway):
    q = RawQuery("Where was Einstein born and where did Churchill live?")
    mock_gateway.add_fixture(
        DECOMPOSE_SYSTEM_PROMPT,
        q.text,
        "1. Where was Einstein born?\n2. Where did Churchill live?\n",
    )
    assert decompose_query(q, mock_gateway) == [
        "Where was Einstein born?",
        "Where did Churchill live?",
    ]


def test_rule_entities(alias_store):
    spans = rule_entities("Where was Sir Winston Churchill born in 1874?", alias_store)
    assert [(s.surface, s.canonical, s.kind) for s in spans] == [
        ("Sir Winston Churchill", "Sir Winston Churchill", "person"),
        ("1874", "1874", "date"),
    ]


@pytest.mark.parametrize(
    "text, expected",
    [
        ("Who founded Tesla Motors?", [("Tesla Motors", "organization")]),
        ("What happened in Paris?", [("Paris", "location")]),
        ("When did Marie Curie die?", [("Marie Curie", "person")]),
        ("What is NASA?", [("NASA", "organization")]),
        ("Modi's visit", [("Modi", "other")]),
    ],
)
def test_rule_entity_kinds(text, expected):
    spans = rule_entities(text, AliasStore())
    assert [(s.surface, s.kind) for s in spans] == expected


def test_extract_entities_deduplicates(alias_store, mock_gateway):
    entities = extract_entities(
        ["Where was Einstein born?", "What did Albert Einstein study?"],
        alias_store,
        mock_gateway,
    )
    assert entities == [Entity("Einstein", "Albert Einstein", "person")]


def test_alias_group_collapses_to_longest_surface(mock_gateway):
    aliases = AliasStore(
        [("Churchill", "Sir Winston Churchill"), ("Sir Winston", "Sir Winston Churchill")]
    )
    entities = extract_entities(
        ["Churchill spoke. Sir Winston Churchill replied."], aliases, mock_gateway
    )
    assert [e.canonical for e in entities] == ["Sir Winston Churchill"]


def test_extract_entities_from_model(alias_store, mock_gateway):
    part = "Where did churchill grow up?"
    mock_gateway.add_fixture(
        ENTITIES_SYSTEM_PROMPT,
        part,
        '[{"name": "churchill", "kind": "person"}, {"name": "Mars", "kind": "location"}]',
    )
    assert extract_entities([part], alias_store, mock_gateway) == [
        Entity("churchill", "Sir Winston Churchill", "person")
    ]


def test_extract_entities_needs_parts(alias_store, mock_gateway):
    with pytest.raises(InvalidQuery):
        extract_entities([], alias_store, mock_gateway)


@pytest.mark.parametrize(
    "parts, temporal, factual, wh",
    [
        (["What is the latest news about Tesla?"], True, False, WhIntent.WHAT),
        (["Who won the election in 2025?"], True, False, WhIntent.WHO),
        (["Who won the election in 1990?"], False, False, WhIntent.WHO),
        (["What is entropy?"], False, True, WhIntent.WHAT),
        (["how do plants grow"], False, False, WhIntent.HOW),
    ],
)
def test_detect_intent(parts, temporal, factual, wh):
    cues = detect_intent(parts, [], current_year=2025)
    assert (cues.temporal, cues.factual, cues.wh_intent) == (temporal, factual, wh)


def test_detect_intent_entities_make_it_factual():
    cues = detect_intent(["Tell me about Ulm"], [Entity("Ulm", "Ulm", "location")])
    assert cues.factual
    assert cues.wh_intent is WhIntent.NONE


def test_expand_acronyms():
    acronyms = {"RL": "reinforcement learning", "KG": "knowledge graph"}
    assert expand_acronyms("Use RL with a KG and RL", acronyms) == (
        "Use reinforcement learning (RL) with a knowledge graph (KG) and RL"
    )
    already = "Use reinforcement learning (RL) today"
    assert expand_acronyms(already, acronyms) == already


def test_expand_acronyms_respects_protected():
    acronyms = {"US": "United States"}
    assert expand_acronyms("US Steel", acronyms, ("US Steel",)) == "US Steel"


@pytest.mark.parametrize(
    "text, expected, wh",
    [
        ("Einstein's birthplace", "Where was Einstein born?", WhIntent.WHERE),
        ("Tesla's founders?", "Who founded Tesla?", WhIntent.WHO),
        ("Churchill's favourite food", "What is Churchill's favourite food?", WhIntent.WHAT),
        ("Tell me about Ulm", "What is known about Ulm?", WhIntent.WHAT),
    ],
)
def test_synthesize_wh(text, expected, wh):
    assert synthesize_wh(text) == (expected, wh)


def test_fit_token_budget():
    text = " ".join(f"w{i}" for i in range(50)) + " Albert Einstein"
    fitted = fit_token_budget(text, ["Albert Einstein"], budget=40)
    assert len(fitted.split()) == 40
    assert fitted.endswith("Albert Einstein")
    with pytest.raises(TokenBudgetUnsatisfiable):
        fit_token_budget("a b c", ["a b c"], budget=2)


def test_augment_rewrites_with_canonicals(alias_store, acronyms, mock_gateway):
    aq = augment(
        RawQuery("How does reinforcement learning apply to robotics?"),
        mock_gateway,
        alias_store,
        acronyms,
    )
    assert aq.text == "How does Reinforcement Learning apply to Robotics?"
    assert [e.canonical for e in aq.entities] == ["Reinforcement Learning", "Robotics"]
    assert aq.cues.factual
    assert aq.cues.wh_intent is WhIntent.HOW


def test_augment_expands_acronym(alias_store, acronyms, mock_gateway):
    aq = augment(RawQuery("Is a KG useful for Robotics"), mock_gateway, alias_store, acronyms)
    assert "knowledge graph (KG)" in aq.text
    assert "Robotics" in aq.text


def test_augment_synthesizes_question(alias_store, acronyms, mock_gateway):
    aq = augment(RawQuery("Einstein's birthplace"), mock_gateway, alias_store, acronyms)
    assert aq.text == "Where was Albert Einstein born?"
    assert aq.cues.wh_intent is WhIntent.WHERE


def test_augment_keeps_temporal_cue(alias_store, mock_gateway):
    aq = augment(
        RawQuery("What is the latest news about Tesla?"),
        mock_gateway,
        alias_store,
        {},
        PipelineConfig(current_year=2025),
    )
    assert aq.cues.temporal
    assert aq.text == "What is the latest news about Tesla?"


def test_augment_ignores_rewrite_losing_entities(alias_store, mock_gateway, mocker):
    ask = mock_gateway.ask

    def fake_ask(system_prompt, user_prompt, **kwargs):
        if system_prompt.startswith("Rewrite the user query"):
            return "Where was he born?"
        return ask(system_prompt, user_prompt, **kwargs)

    mocker.patch.object(mock_gateway, "ask", side_effect=fake_ask)
    aq = augment(RawQuery("Where was Einstein born?"), mock_gateway, alias_store, {})
    assert aq.text == "Where was Albert Einstein born?"


def test_substitute_canonicals(alias_store):
    entities = [
        Entity("Einstein", "Albert Einstein", "person"),
        Entity("Curie", "Marie Curie", "person"),
    ]
    assert substitute_canonicals("Did Einstein meet Curie?", alias_store, entities) == (
        "Did Albert Einstein meet Marie Curie?"
    )
    assert substitute_canonicals("Did rl help?", alias_store, []) == (
        "Did Reinforcement Learning help?"
    )


def test_augment_maps_churchill_group(alias_store, acronyms, mock_gateway):
    q = RawQuery("Where did Churchill grow up?")
    aq = augment(q, mock_gateway, alias_store, acronyms)
    assert aq.text == "Where did Sir Winston Churchill grow up?"
    assert [(e.surface, e.canonical, e.kind) for e in aq.entities] == [
        ("Churchill", "Sir Winston Churchill", "person")
    ]


def test_rule_entities_skip_spelled_out_acronyms():
    acronyms = {"NASA": "National Aeronautics and Space Administration"}
    text = (
        "What is known about National Aeronautics and Space Administration (NASA)"
        " missions?"
    )
    spans = rule_entities(text, AliasStore(), acronyms)
    assert [s.canonical for s in spans] == ["NASA"]
    reverse = "Is NASA (National Aeronautics and Space Administration) old?"
    assert [s.canonical for s in rule_entities(reverse, AliasStore(), acronyms)] == ["NASA"]
    plain = "Who runs National Aeronautics missions?"
    assert [s.canonical for s in rule_entities(plain, AliasStore(), acronyms)] == [
        "National Aeronautics"
    ]


def test_augment_is_idempotent_with_acronyms(mock_gateway):
    acronyms = {"NASA": "National Aeronautics and Space Administration"}
    first = augment(
        RawQuery("Tell me about NASA missions in 2010"), mock_gateway, AliasStore(), acronyms
    )
    assert first.text == (
        "What is known about National Aeronautics and Space Administration (NASA)"
        " missions in 2010?"
    )
    second = augment(RawQuery(first.text), mock_gateway, AliasStore(), acronyms)
    assert second.text == first.text
    assert [e.canonical for e in second.entities] == [e.canonical for e in first.entities]
    assert [e.canonical for e in first.entities] == ["NASA", "2010"]


def test_augment_is_idempotent_with_aliases(alias_store, acronyms, mock_gateway):
    first = augment(RawQuery("How is a KG useful for rl?"), mock_gateway, alias_store, acronyms)
    assert first.text == "How is a knowledge graph (KG) useful for Reinforcement Learning?"
    second = augment(RawQuery(first.text), mock_gateway, alias_store, acronyms)
    assert second.text == first.text
    assert [e.canonical for e in second.entities] == ["KG", "Reinforcement Learning"]
    assert [e.canonical for e in first.entities] == ["KG", "Reinforcement Learning"]


CONTRACT_TEMPLATES = [
    "Where was {} born?",
    "Who is {}?",
    "What did {} study?",
    "When did {} travel to Paris?",
    "How did {} become famous?",
    "Why is {} " + "really " * 40 + "important?",
    "Which books mention {}?",
    "{}'s birthplace",
    "Tell me about {}",
    "Is {} related to Robotics?",
]
CONTRACT_SUBJECTS = {
    "Einstein": "Albert Einstein",
    "Albert Einstein": "Albert Einstein",
    "Churchill": "Sir Winston Churchill",
    "Winston Churchill": "Sir Winston Churchill",
    "Sir Winston Churchill": "Sir Winston Churchill",
    "RL": "Reinforcement Learning",
    "reinforcement learning": "Reinforcement Learning",
    "Marie Curie": "Marie Curie",
    "Tesla Motors": "Tesla Motors",
    "Ulm": "Ulm",
}


@pytest.mark.parametrize(
    "template, subject", list(itertools.product(CONTRACT_TEMPLATES, CONTRACT_SUBJECTS))
)
def test_augment_contract(template, subject, alias_store, acronyms, mock_gateway):
    aq = augment(RawQuery(template.format(subject)), mock_gateway, alias_store, acronyms)
    assert count_tokens(aq.text) <= 40
    canonicals = [e.canonical for e in aq.entities]
    assert CONTRACT_SUBJECTS[subject] in canonicals
    assert all(canonical in aq.text for canonical in canonicals)
    assert not (aq.cues.temporal and aq.cues.factual)
