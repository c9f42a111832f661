from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import syntax
from diagnostics import PrintError
from model_gen import generate
from syntax import TokenKind


def kinds(text):
    tokens, _ = syntax.tokenize(text)
    return [t.kind for t in tokens]


def codes(diagnostics):
    return Counter(d.code for d in diagnostics)


# ---- lexer ----

def test_tokenize_minimal_method():
    assert kinds('method "TDSP" {}') == [TokenKind.KEYWORD, TokenKind.STRING, TokenKind.PUNCT,
                                         TokenKind.PUNCT, TokenKind.EOF]


def test_keywords_identifiers_and_arrow():
    tokens, diagnostics = syntax.tokenize("flow activity_a -> activityB")
    assert diagnostics == []
    assert [(t.kind, t.text) for t in tokens[:-1]] == [
        (TokenKind.KEYWORD, "flow"),
        (TokenKind.IDENTIFIER, "activity_a"),
        (TokenKind.ARROW, "->"),
        (TokenKind.IDENTIFIER, "activityB"),
    ]


@pytest.mark.parametrize("text, expected", [
    ("0.85", ["0.85"]),
    ("-2.5", ["-2.5"]),
    ("200", ["200"]),
    ("1 -3", ["1", "-3"]),
])
def test_numbers(text, expected):
    tokens, diagnostics = syntax.tokenize(text)
    assert diagnostics == []
    assert [t.text for t in tokens if t.kind is TokenKind.NUMBER] == expected


def test_comments_and_whitespace_are_trivia():
    text = "// header\nmethod  \"m\"\t{ // trailing\n}\n"
    tokens, diagnostics = syntax.tokenize(text)
    assert diagnostics == []
    assert [t.text for t in tokens] == ["method", '"m"', "{", "}", ""]
    assert tokens[0].trivia == "// header\n"


def test_unterminated_string():
    tokens, diagnostics = syntax.tokenize('"abc')
    assert [d.code for d in diagnostics] == ["P001"]
    assert (diagnostics[0].span.byte_start, diagnostics[0].span.byte_end) == (0, 4)
    assert [t.kind for t in tokens] == [TokenKind.STRING, TokenKind.EOF]


def test_string_stops_at_end_of_line():
    _, diagnostics = syntax.tokenize('"abc\n"def"')
    assert diagnostics[0].code == "P001"
    assert diagnostics[0].span.line == 1


def test_invalid_character_is_reported_and_skipped():
    tokens, diagnostics = syntax.tokenize("method $ \"m\"")
    assert [d.code for d in diagnostics] == ["P002"]
    assert diagnostics[0].span.column == 8
    assert [t.kind for t in tokens] == [TokenKind.KEYWORD, TokenKind.STRING, TokenKind.EOF]


def test_spans_are_utf8_byte_offsets():
    tokens, _ = syntax.tokenize('method "é" {}')
    brace = tokens[2]
    assert brace.text == "{"
    # é takes two bytes but one column
    assert brace.span.byte_start == 12
    assert brace.span.column == 12
    assert brace.span.line == 1


def test_string_escapes_decode():
    tokens, _ = syntax.tokenize(r'"a\"b\\c\nd\te"')
    assert tokens[0].value == 'a"b\\c\nd\te'


def test_quote_escapes_what_the_lexer_decodes():
    value = 'say "hi"\\\n\tdone'
    tokens, diagnostics = syntax.tokenize(syntax.quote(value))
    assert diagnostics == []
    assert tokens[0].value == value


def test_bytes_input_is_decoded():
    assert kinds('method "é" {}'.encode("utf-8")) == kinds('method "é" {}')


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=200))
def test_tokens_and_trivia_reconstruct_any_input(text):
    tokens, _ = syntax.tokenize(text)
    assert tokens[-1].kind is TokenKind.EOF
    assert "".join(t.trivia + t.text for t in tokens) == text


def test_invalid_utf8_byte_keeps_byte_offsets():
    data = b'method "m" {}\xff'
    tokens, diagnostics = syntax.tokenize(data)
    assert [d.code for d in diagnostics] == ["P002"]
    span = diagnostics[0].span
    assert (span.byte_start, span.byte_end) == (13, 14)
    assert "0xFF" in diagnostics[0].message
    assert [t.kind for t in tokens] == [TokenKind.KEYWORD, TokenKind.STRING, TokenKind.PUNCT,
                                        TokenKind.PUNCT, TokenKind.EOF]
    assert tokens[-1].span.byte_start == len(data)


def test_invalid_bytes_in_strings_and_comments_are_reported():
    data = b'method "a\xc3" { // \xfe\n}'
    _, diagnostics = syntax.tokenize(data)
    assert [d.code for d in diagnostics] == ["P002", "P002"]
    assert [d.span.byte_start for d in diagnostics] == [9, 17]


def test_invalid_bytes_are_escaped_in_messages():
    _, diagnostics = syntax.parse(b'method "m" { role "x\x80" }')
    assert "P002" in codes(diagnostics)
    for d in diagnostics:
        d.message.encode("utf-8")


def in_bounds(diagnostics, size):
    return all(0 <= d.span.byte_start <= d.span.byte_end <= size
               for d in diagnostics if d.span is not None)


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=300))
def test_parse_is_total_over_bytes(data):
    tokens, _ = syntax.tokenize(data)
    rebuilt = "".join(t.trivia + t.text for t in tokens)
    assert rebuilt.encode("utf-8", "surrogateescape") == data
    tree, diagnostics = syntax.parse(data)
    assert tree is not None
    assert in_bounds(diagnostics, len(data))


MUTATION_SNIPPETS = [" {", " }", " ->", ' "', " :", " ,", " activity", " flow", " 42"]


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_parse_survives_token_mutations_of_the_corpus(tdsp_text, data):
    tokens, _ = syntax.tokenize(tdsp_text)
    pieces = [t.trivia + t.text for t in tokens]
    for _ in range(data.draw(st.integers(1, 8))):
        i = data.draw(st.integers(0, len(pieces) - 1))
        op = data.draw(st.sampled_from(["drop", "duplicate", "swap", "insert"]))
        if op == "drop":
            del pieces[i]
        elif op == "duplicate":
            pieces.insert(i, pieces[i])
        elif op == "swap":
            j = data.draw(st.integers(0, len(pieces) - 1))
            pieces[i], pieces[j] = pieces[j], pieces[i]
        else:
            pieces.insert(i, data.draw(st.sampled_from(MUTATION_SNIPPETS)))
    text = "".join(pieces)
    tree, diagnostics = syntax.parse(text)
    assert tree is not None
    assert in_bounds(diagnostics, len(text.encode("utf-8")))


# ---- parser ----

def test_parse_minimal_method():
    tree, diagnostics = syntax.parse('method "m" {}')
    assert diagnostics == []
    assert tree.name == "m"
    assert tree.items == []


def test_parse_tdsp(tdsp_tree):
    top = tdsp_tree.of_type(syntax.AstActivity)
    assert [a.id for a in top] == ["business_understanding", "data_acquisition",
                                   "modeling", "operations"]
    explore = top[1].of_type(syntax.AstActivity)[1]
    assert explore.display_name == "Explore and visualize data"
    assert len(explore.of_type(syntax.AstActivity)) == 4
    contributor = [r for r in tdsp_tree.of_type(syntax.AstRole) if r.id == "contributor"][0]
    assert contributor.kind == "Custom"
    assert contributor.custom_label.startswith("Analyst")


def test_empty_input():
    tree, diagnostics = syntax.parse("")
    assert [d.code for d in diagnostics] == ["P010"]
    assert tree.errors


def test_only_one_method_per_file():
    _, diagnostics = syntax.parse('method "a" {}\nmethod "b" {}')
    assert [d.code for d in diagnostics] == ["P010"]
    assert "exactly one method" in diagnostics[0].message


def test_recovery_reports_every_error_in_one_pass():
    text = """method "m" {
  role r : Wizard
  activity a {
    input
  }
  artifact x : Document {
    ranking 3
  }
  activity b
}
"""
    tree, diagnostics = syntax.parse(text)
    assert codes(diagnostics) == Counter({"P010": 2, "P011": 1})
    # declarations after the broken ones are still there
    assert [a.id for a in tree.of_type(syntax.AstActivity)] == ["a", "b"]


def test_unknown_kind_suggests_the_closest_literal():
    _, diagnostics = syntax.parse('method "m" { activity a : BusinesActivity }')
    assert diagnostics[0].code == "P011"
    assert "did you mean 'BusinessActivity'?" in diagnostics[0].message


def test_duplicate_single_valued_attribute():
    _, diagnostics = syntax.parse('method "m" { activity a { optional optional } }')
    assert [d.code for d in diagnostics] == ["P012"]


@pytest.mark.parametrize("body, missing", [
    ("criterion c : BusinessSuccessCriterion { evaluates g baseline 1 dataType Number }", "target"),
    ('performance p "AUC" { direction Maximize }', "threshold"),
    ("goal g : BusinessGoal", "statement"),
])
def test_missing_mandatory_attribute(body, missing):
    _, diagnostics = syntax.parse(f'method "m" {{ activity a {{ {body} }} }}')
    assert [d.code for d in diagnostics] == ["P013"]
    assert f"'{missing}'" in diagnostics[0].message


def test_deployment_needs_all_three_choices():
    _, diagnostics = syntax.parse('method "m" { activity a { deployment { pattern Static } } }')
    assert codes(diagnostics) == Counter({"P013": 2})


def test_attribute_of_another_artifact_kind():
    _, diagnostics = syntax.parse('method "m" { artifact d : Document { ranking 1 } }')
    assert [d.code for d in diagnostics] == ["P010"]
    assert "Document artifact" in diagnostics[0].message


def test_deep_nesting_is_an_error_not_a_crash():
    depth = 80
    text = 'method "m" {' + "".join(f" activity a{i} {{" for i in range(depth)) \
        + " }" * depth + " }"
    _, diagnostics = syntax.parse(text)
    assert any(d.code == "P010" and "too deeply" in d.message for d in diagnostics)


def test_missing_closing_brace():
    _, diagnostics = syntax.parse('method "m" { activity a {')
    assert diagnostics
    assert all(d.code == "P010" for d in diagnostics)


def test_lexer_errors_come_with_the_parse():
    tree, diagnostics = syntax.parse('method "m {}')
    assert "P001" in codes(diagnostics)
    assert tree.errors


# ---- printer ----

def test_print_minimal():
    tree, _ = syntax.parse('method "m" {}')
    assert syntax.print_canonical(tree) == 'method "m" {\n}\n'


def test_print_omits_absent_kind_and_name():
    tree, _ = syntax.parse('method "m" { activity a activity b "B" : Generic }')
    assert syntax.print_canonical(tree) == 'method "m" {\n  activity a\n  activity b "B" : Generic\n}\n'


def test_print_normalizes_layout():
    text = 'method "m"{activity a{output x input y optional}flow a->a artifact x:Data}'
    tree, diagnostics = syntax.parse(text)
    assert diagnostics == []
    assert syntax.print_canonical(tree) == (
        'method "m" {\n'
        '  activity a {\n'
        '    optional\n'
        '    input y\n'
        '    output x\n'
        '  }\n'
        '  flow a -> a\n'
        '  artifact x : Data\n'
        '}\n'
    )


def test_print_refuses_trees_with_errors():
    tree, _ = syntax.parse('method "m" { role }')
    with pytest.raises(PrintError) as exc:
        syntax.print_canonical(tree)
    assert exc.value.code == "P020"


def test_corpus_is_canonically_formatted(tdsp_text, tdsp_tree):
    assert syntax.print_canonical(tdsp_tree) == tdsp_text


def test_tdsp_round_trip(tdsp_tree):
    again, diagnostics = syntax.parse(syntax.print_canonical(tdsp_tree))
    assert diagnostics == []
    assert again == tdsp_tree


@settings(max_examples=1000, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1), violations=st.booleans())
def test_round_trip_generated_models(seed, violations):
    text = generate(seed, violations=violations).text
    tree, diagnostics = syntax.parse(text)
    assert diagnostics == [], text
    printed = syntax.print_canonical(tree)
    again, diagnostics = syntax.parse(printed)
    assert diagnostics == []
    assert again == tree
    assert syntax.print_canonical(again) == printed
