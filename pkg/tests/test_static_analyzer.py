"""Lexer, rule format and the pattern analyzer over labelled PHP snippets."""

from __future__ import annotations

import re
from pathlib import Path

import pytest
import yaml

from conftest import DATA
from webaudit.checklist import Mode
from webaudit.model import NA, NO, UNKNOWN, YES, Source
from webaudit.static_analyzer import (
    CodeCorpus,
    CorpusError,
    PatternRule,
    RuleError,
    StaticAnalyzer,
    analyze_output_escaping,
    analyze_password_storage,
    analyze_session_and_logging,
    analyze_sql_construction,
    default_rules,
    load_rules_file,
    parse_rules,
    run_static,
    split_statements,
    supplementary_rules,
)

CORPUS = DATA / "static_corpus"
LABELS = yaml.safe_load((CORPUS / "labels.yaml").read_text(encoding="utf-8"))


def one(text: str, path: str = "t.php") -> CodeCorpus:
    return CodeCorpus.from_text(text, path)


def values(report) -> dict[str, str]:
    return {o.parameter_id: o.value for o in report.observations}


# -- lexer ---------------------------------------------------------------------------

def test_split_statements_lines_and_comments():
    src = "<?php\n// md5($password)\n$a = 1; /* md5($p) */\n$b = 'x;y';\n"
    sts = split_statements(src, "f.php")
    assert [s.text for s in sts] == ["$a = 1", "$b = 'x;y'"]
    assert [s.line for s in sts] == [3, 4]
    assert sts[0].where == "f.php:3"


def test_inline_html_ignored_and_short_echo():
    src = "<html><?php $x = $_GET['a']; ?><p>md5($password)</p><?= $x ?></html>"
    texts = [s.text for s in split_statements(src, "v.php")]
    assert texts == ["$x = $_GET['a']", "echo $x"]


def test_function_scope_includes_header():
    src = "<?php function login($u, $p) { $q = 1; }\n$top = 2;"
    sts = split_statements(src)
    assert sts[0].scope == sts[1].scope and sts[0].scope[0] == "login"
    assert sts[-1].scope == ("<file>", 0)


def test_heredoc_kept_whole():
    src = "<?php\n$sql = <<<SQL\nSELECT * FROM t; -- not a split\nSQL;\n$next = 1;"
    texts = [s.text for s in split_statements(src)]
    assert texts[0].startswith("$sql = <<<SQL") and "not a split" in texts[0]
    assert texts[-1] == "$next = 1"


def test_text_file_without_php_tag_has_no_statements():
    assert split_statements("plain words; more words", "notes.txt") == []
    assert split_statements("$a = 1;", "lib.php")[0].text == "$a = 1"


# -- rule format ----------------------------------------------------------------------

def test_rule_round_trip_with_escaped_pipes():
    rule = PatternRule("r1", "sqli.parameterized", r"a|b", "near:2:x|y && tainted", "No", "NA")
    assert parse_rules(rule.to_line()) == [rule]


@pytest.mark.parametrize("line", [
    "r|p|(unclosed|statement|Yes/No",
    "r|p|x|bogus|Yes/No",
    "r|p|x|statement|YesNo",
    "r|p|x|statement",
])
def test_bad_rules_rejected(line):
    with pytest.raises(RuleError):
        parse_rules(line)


def test_duplicate_rule_id_rejected():
    with pytest.raises(RuleError):
        parse_rules("a|p|x|statement|Yes/No\na|p|y|statement|Yes/No")


def test_default_rules_cover_exactly_the_static_parameters(checklist):
    static = {s.id for s in checklist.by_mode(Mode.Static)}
    assert {r.parameter_id for r in default_rules()} == static


def test_supplementary_rules_only_cover_dynamic_parameters(checklist):
    dynamic = {s.id for s in checklist.by_mode(Mode.Dynamic)}
    assert {r.parameter_id for r in supplementary_rules()} <= dynamic


def test_analyzer_rejects_rules_for_unknown_parameters(checklist):
    with pytest.raises(RuleError):
        StaticAnalyzer(parse_rules("r|no.such|x|statement|Yes/No"), checklist)


def test_absence_verdict_needs_guard(checklist):
    with pytest.raises(RuleError):
        StaticAnalyzer(parse_rules("r|logging.failed_logins|x|statement|Yes/No"), checklist)


# -- corpus ---------------------------------------------------------------------------

def test_empty_corpus_is_error():
    with pytest.raises(CorpusError):
        run_static(CodeCorpus([]))


def test_duplicate_paths_rejected():
    with pytest.raises(CorpusError):
        CodeCorpus([("a.php", ""), ("a.php", "")])


def test_from_directory_lossy_decoding(tmp_path: Path):
    (tmp_path / "bad.php").write_bytes(b"<?php $x = '\xff\xfe'; echo $x;")
    (tmp_path / "skip.bin").write_bytes(b"\x00")
    corpus = CodeCorpus.from_directory(tmp_path)
    assert [p for p, _ in corpus.files] == ["bad.php"]
    assert "�" in corpus.files[0][1]


@pytest.mark.parametrize("name", sorted(LABELS))
def test_labelled_snippet(name):
    report = run_static(one((CORPUS / name).read_text(encoding="utf-8"), name))
    got = values(report)
    for pid, expected in LABELS[name].items():
        assert got[pid] == expected, f"{name}: {pid}"


def test_labelled_corpus_is_large_enough_and_covers_topics():
    assert len(LABELS) >= 12
    hashes = {v.get("storage.hash_algorithm") for v in LABELS.values()}
    assert {"bcrypt", "Argon2", "PBKDF2", NA} <= hashes
    for pid in ("sqli.parameterized", "xss.script_execution", "session.regenerated",
                "logging.failed_logins"):
        seen = {v.get(pid) for v in LABELS.values()}
        assert {YES, NO} <= seen, pid


# -- topic operations -----------------------------------------------------------------

def test_password_storage_examples():
    obs = {o.parameter_id: o.value for o in
           analyze_password_storage(one("<?php $h = password_hash($pw, PASSWORD_DEFAULT);"))}
    assert obs == {"storage.hash_algorithm": "bcrypt", "storage.salted": YES}
    obs = {o.parameter_id: o.value for o in
           analyze_password_storage(one("<?php $h = password_hash($pw, PASSWORD_ARGON2I);"))}
    assert obs == {"storage.hash_algorithm": "Argon2", "storage.salted": YES}
    obs = {o.parameter_id: o.value for o in
           analyze_password_storage(one("<?php $st->execute([$user, $password]);"))}
    assert obs == {"storage.hash_algorithm": NA, "storage.salted": NA}


def test_sql_one_interpolated_among_ten_prepared():
    lines = [f"$s{i} = $db->prepare('SELECT * FROM t{i} WHERE id = ?');" for i in range(10)]
    lines.insert(4, "$r = $db->query(\"SELECT * FROM t WHERE name = '{$_GET['n']}'\");")
    obs = analyze_sql_construction(one("<?php\n" + "\n".join(lines)))
    assert obs.value == NO
    assert [e.request for e in obs.evidence] == ["t.php:6"]


def test_sql_all_prepared_and_no_queries():
    assert analyze_sql_construction(one(
        "<?php $s = $pdo->prepare('SELECT 1 FROM t WHERE a = ?'); $s->execute([$_GET['a']]);"
    )).value == YES
    assert analyze_sql_construction(one("<?php $x = 1;")).value == NA


def test_sql_taint_through_assignment_chain():
    src = "<?php\n$id = $_GET['id'];\n$where = 'id = ' . $id;\n$sql = \"SELECT * FROM t WHERE $where\";\nmysqli_query($conn, $sql);"
    assert analyze_sql_construction(one(src)).value == NO


def test_output_escaping_examples():
    esc = {o.value for o in analyze_output_escaping(
        one("<?php echo htmlspecialchars($_GET['q'], ENT_QUOTES);"))}
    raw = {o.value for o in analyze_output_escaping(one("<?php echo $_GET['q'];"))}
    none = {o.value for o in analyze_output_escaping(one("<?php $a = 1;"))}
    assert esc == {NO} and raw == {YES} and none == {NA}


def test_session_and_logging_examples():
    src = ("<?php session_start();\nfunction login($u, $p) {\n if (password_verify($p, $h)) {"
           " session_regenerate_id(true); return true; }\n"
           " file_put_contents('auth.log', \"failed login $u\\n\", FILE_APPEND); return false; }")
    obs = {o.parameter_id: o.value for o in analyze_session_and_logging(one(src))}
    assert obs["session.regenerated"] == YES
    assert obs["logging.failed_logins"] == YES
    none = {o.parameter_id: o.value for o in analyze_session_and_logging(one("<?php $a = 1;"))}
    assert none["session.regenerated"] == NA and none["session.cookie_secure"] == NA


# -- run_static contract --------------------------------------------------------------

def test_run_static_every_static_parameter_once(checklist):
    report = run_static(one("<?php $a = 1;"), checklist, supplementary=False)
    ids = [o.parameter_id for o in report.observations]
    assert ids == sorted(s.id for s in checklist.by_mode(Mode.Static))
    assert report.source is Source.Static
    assert all(o.source is Source.Static for o in report.observations)


def test_run_static_non_code_corpus_all_na(checklist):
    corpus = CodeCorpus([("README.txt", "hash passwords with md5(password) lol")])
    report = run_static(corpus, checklist)
    assert {o.value for o in report.observations} == {NA}


def test_uncovered_static_parameter_is_unknown(checklist):
    rules = [r for r in default_rules() if r.parameter_id != "storage.salted"]
    report = run_static(one("<?php $a = 1;"), checklist, rules=rules, supplementary=False)
    assert report.observation("storage.salted").value == UNKNOWN


def test_gemini_like_corpus_matches_reference(checklist, reference_values):
    report = run_static(CodeCorpus.from_directory(DATA / "reference_corpora" / "gemini"), checklist)
    for spec in checklist.by_mode(Mode.Static):
        assert report.observation(spec.id).value == reference_values["Gemini"][spec.id], spec.id


def test_claude_like_corpus_matches_reference(checklist, reference_values):
    report = run_static(CodeCorpus.from_directory(DATA / "reference_corpora" / "claude"), checklist)
    for spec in checklist.by_mode(Mode.Static):
        assert report.observation(spec.id).value == reference_values["Claude"][spec.id], spec.id


def _all_corpora():
    yield CodeCorpus.from_directory(CORPUS)
    yield CodeCorpus.from_directory(DATA / "reference_corpora")


@pytest.mark.parametrize("corpus", list(_all_corpora()), ids=["snippets", "reference"])
def test_determinism_and_resolvable_evidence(corpus, checklist):
    a, b = run_static(corpus, checklist), run_static(corpus, checklist)
    assert [o.key() for o in a.observations] == [o.key() for o in b.observations]
    files = dict(corpus.files)
    for o in a.observations:
        if o.value in (YES, NO):
            assert o.evidence, o.parameter_id
        for ev in o.evidence:
            path, line = re.fullmatch(r"(.+):(\d+)", ev.request).groups()
            assert path in files
            assert 1 <= int(line) <= files[path].count("\n") + 1


def test_rules_file_override(tmp_path, checklist):
    rules = tmp_path / "rules.txt"
    rules.write_text("\n".join(r.to_line() for r in default_rules()) + "\n", encoding="utf-8")
    loaded = load_rules_file(rules)
    assert loaded == default_rules()
    corpus = one("<?php $h = password_hash($p);")
    assert values(run_static(corpus, checklist, rules=loaded)) == values(run_static(corpus, checklist))
