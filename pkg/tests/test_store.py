"""Cache durability, tamper detection, and the cost ledger."""

from __future__ import annotations

import json

from contribsum.store import (
    CostLedger,
    Store,
    cache_key,
    ledger_report,
    resolve_state_dir,
)


class TestCacheKey:
    def test_equal_inputs_equal_keys(self):
        a = cache_key("scope", "tmpl", "model", "payload")
        b = cache_key("scope", "tmpl", "model", "payload")
        assert a == b and len(a) == 64

    def test_any_input_change_changes_key(self):
        base = cache_key("scope", "tmpl", "model", "payload")
        assert cache_key("scope2", "tmpl", "model", "payload") != base
        assert cache_key("scope", "tmpl2", "model", "payload") != base
        assert cache_key("scope", "tmpl", "model2", "payload") != base
        assert cache_key("scope", "tmpl", "model", "payload2") != base


class TestStore:
    def test_get_on_empty_store_absent(self, tmp_path):
        assert Store(tmp_path / "cache").get("a" * 64) is None

    def test_put_then_get_identical(self, tmp_path):
        store = Store(tmp_path / "cache")
        key = cache_key("s", "t", "m", "p")
        payload = {"text": "hello", "input_tokens": 10, "output_tokens": 3}
        store.put(key, payload)
        assert store.get(key) == payload

    def test_put_idempotent(self, tmp_path):
        store = Store(tmp_path / "cache")
        key = cache_key("s", "t", "m", "p")
        store.put(key, {"text": "same"})
        before = list(store.directory.rglob("*.json"))[0].read_bytes()
        store.put(key, {"text": "same"})
        after = list(store.directory.rglob("*.json"))[0].read_bytes()
        assert before == after

    def test_tampered_entry_treated_as_absent(self, tmp_path):
        store = Store(tmp_path / "cache")
        key = cache_key("s", "t", "m", "p")
        store.put(key, {"text": "authentic"})
        entry_path = list(store.directory.rglob("*.json"))[0]
        raw = json.loads(entry_path.read_text())
        raw["payload_json"] = raw["payload_json"].replace("authentic", "tampered!")
        entry_path.write_text(json.dumps(raw))
        assert store.get(key) is None

    def test_survives_reopen(self, tmp_path):
        key = cache_key("s", "t", "m", "p")
        Store(tmp_path / "cache").put(key, {"text": "durable"})
        assert Store(tmp_path / "cache").get(key) == {"text": "durable"}

    def test_fanout_layout(self, tmp_path):
        store = Store(tmp_path / "cache")
        key = "ab" + "c" * 62
        store.put(key, {"text": "x"})
        assert (tmp_path / "cache" / "ab" / (key[2:] + ".json")).exists()


class TestCostLedger:
    def test_zero_tokens_zero_cost(self):
        ledger = CostLedger()
        entry = ledger.add("analysis", "m", 0, 0, 0.0)
        assert entry.cost == 0.0
        assert ledger.total == 0.0

    def test_totals_are_sum_of_entries(self):
        ledger = CostLedger()
        ledger.add("analysis", "m", 1000, 0, 0.15)
        ledger.add("analysis", "m", 0, 1000, 0.60)
        ledger.add("synthesis", "big", 1000, 0, 2.50)
        assert ledger.total == 0.15 + 0.60 + 2.50
        assert ledger.totals_by_tier() == {"analysis": 0.75, "synthesis": 2.50}

    def test_persisted_and_reloaded(self, tmp_path):
        path = tmp_path / "ledger.jsonl"
        ledger = CostLedger(path)
        ledger.add("analysis", "m", 10_000, 0, 1.50)
        again = CostLedger(path)
        assert len(again.entries) == 1
        assert again.total == 1.50

    def test_append_is_crash_safe_lines(self, tmp_path):
        path = tmp_path / "ledger.jsonl"
        ledger = CostLedger(path)
        ledger.add("analysis", "m", 1, 2, 0.1)
        ledger.add("synthesis", "n", 3, 4, 0.2)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 2
        for line in lines:
            json.loads(line)  # each line independently parseable

    def test_negative_tokens_rejected(self):
        ledger = CostLedger()
        try:
            ledger.add("analysis", "m", -1, 0, 0.0)
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")


class TestLedgerReport:
    def test_empty_ledger_all_zeros(self):
        text = ledger_report(CostLedger())
        assert "$0.00" in text
        assert "(no entries)" in text

    def test_per_tier_subtotals_sum_to_total(self):
        ledger = CostLedger()
        ledger.add("analysis", "m", 1000, 1000, 1.25)
        ledger.add("synthesis", "big", 1000, 500, 2.75)
        text = ledger_report(ledger)
        assert "$1.25" in text
        assert "$2.75" in text
        assert "total: $4.00" in text


class TestStateDir:
    def test_env_var_overrides(self, monkeypatch, tmp_path):
        monkeypatch.setenv("CONTRIBSUM_STATE", str(tmp_path / "from-env"))
        assert resolve_state_dir("configured") == tmp_path / "from-env"

    def test_configured_beats_default(self, monkeypatch):
        monkeypatch.delenv("CONTRIBSUM_STATE", raising=False)
        assert str(resolve_state_dir("configured")) == "configured"
        assert str(resolve_state_dir(None)) == ".contribsum"
