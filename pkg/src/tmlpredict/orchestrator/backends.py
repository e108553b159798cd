"""Agent backends: the role-tagged request/response boundary.

A backend turns (role, context, message) into a response string; structured
roles answer JSON matching a per-role schema, and the engine re-asks once
on a parse failure before giving up. The scripted backend is a deterministic
test double: its responses are a pure function of (role, context, message,
seed), with quirk knobs to exercise failure paths. The OpenAI-compatible
backend talks to any /chat/completions endpoint.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol

from .store import canonical_dumps


class BackendProtocolError(RuntimeError):
    pass


class AgentBackend(Protocol):
    def send(self, role: str, context: dict, message: str) -> str: ...


#: marker appended by the engine when re-asking after a parse failure
REASK_MARKER = "Return only valid JSON matching the required schema."

#: prohibited-operation patterns for thought methods
PROHIBITED_OPERATIONS: tuple[tuple[str, str], ...] = (
    ("fine-tuning", r"fine[\s-]?tun"),
    ("creating new datasets", r"creat\w*\s+(?:a\s+)?new\s+dataset"),
    ("downloading models locally", r"download\w*\s+(?:\w+\s+){0,2}model"),
    ("training new models from scratch", r"train\w*\s+(?:\w+\s+){0,3}from\s+scratch|train\w*\s+(?:a\s+)?new\s+model"),
    ("accessing unavailable external APIs", r"external\s+api"),
)


def capability_violations(method: str) -> list[str]:
    """Prohibited operations mentioned by a thought method."""
    text = method.lower()
    return [name for name, pattern in PROHIBITED_OPERATIONS if re.search(pattern, text)]


@dataclass(frozen=True)
class ScriptedQuirks:
    """Deterministic misbehavior knobs for the scripted backend."""

    n_thoughts: int | None = None
    duplicate_hypothesis: bool = False
    prohibited_method: bool = False
    omit_language: bool = False           # hypotheses avoid naming the language
    off_guidance: bool = False            # hypotheses marked unfaithful
    coder_error: bool = False
    reporter_no_answer: bool = False
    analyzer_discard_completed: bool = False
    malformed_roles: frozenset[str] = frozenset()

    @classmethod
    def from_seed(cls, seed: int) -> "ScriptedQuirks":
        """Randomized-but-deterministic quirk mix for property testing."""
        digest = hashlib.sha256(f"quirks:{seed}".encode()).digest()
        return cls(
            n_thoughts=1 + digest[0] % 5,
            duplicate_hypothesis=digest[1] % 4 == 0,
            prohibited_method=digest[2] % 4 == 0,
            omit_language=digest[3] % 5 == 0,
            off_guidance=digest[4] % 6 == 0,
            coder_error=digest[5] % 5 == 0,
            reporter_no_answer=digest[6] % 6 == 0,
            analyzer_discard_completed=digest[7] % 7 == 0,
            malformed_roles=(
                frozenset({"thought_creator"}) if digest[8] % 5 == 0 else frozenset()
            ),
        )


def _fmt(value: float) -> str:
    return repr(round(float(value), 4))


class ScriptedBackend:
    """Rule-based backend; deterministic given (role, context, message, seed)."""

    def __init__(self, seed: int = 0, quirks: ScriptedQuirks | None = None):
        self.seed = seed
        self.quirks = quirks or ScriptedQuirks()

    # -- dispatch ------------------------------------------------------------

    def send(self, role: str, context: dict, message: str) -> str:
        if role in self.quirks.malformed_roles and REASK_MARKER not in message:
            return "I could not produce structured output for this request."
        handler = getattr(self, f"_role_{role}", None)
        if handler is None:
            raise BackendProtocolError(f"scripted backend has no role {role!r}")
        # re-asks append the marker; handlers that parse the message as JSON
        # must see the original payload
        message = message.replace("\n" + REASK_MARKER, "").replace(REASK_MARKER, "")
        return handler(context, message)

    # -- thought creation ----------------------------------------------------

    def _role_thought_creator(self, context: dict, message: str) -> str:
        query = context["query"]
        task = query["task"]
        language = query.get("language") or "the target language"
        family = query.get("model_family") or ""
        summary = context.get("reduced_summary", {})
        observed = summary.get("observed", {})
        fams_for_lang = summary.get("families_for_language", {})
        lang_label = "the target language" if self.quirks.omit_language else language
        prefix = "Unrelated angle: " if self.quirks.off_guidance else ""

        if family:
            candidates = [family]
        else:
            candidates = fams_for_lang.get(language, []) or summary.get("families", [])
        candidates = candidates[:4]

        direct_lookups = [[language, fam] for fam in candidates]
        transfer_lookups = []
        for fam in candidates:
            for other in observed.get(fam, [])[:4]:
                transfer_lookups.append([other, fam])
        cross_lookups = []
        for fam, langs in sorted(observed.items()):
            for other in langs[:2]:
                cross_lookups.append([other, fam])
        cross_lookups = cross_lookups[:6]

        thoughts = [
            {
                "name": "direct_evidence",
                "hypothesis": f"{prefix}Reported scores directly answer the {task} "
                f"question for {lang_label}",
                "method": "Retrieve reported results for the exact task, model "
                "family, and language combination from the restricted evidence "
                "and validate metric compatibility.",
                "tools": ["kb", "coder", "reporter"],
                "lookups": direct_lookups,
            },
            {
                "name": "similar_language_transfer",
                "hypothesis": f"{prefix}Typologically informed transfer from observed "
                f"languages predicts {task} performance for {lang_label}",
                "method": "Compare typological feature vectors of the target and "
                "observed languages; fit a feature-informed regression over the "
                "observed scores for the same model family.",
                "tools": ["kb", "search", "coder", "reporter"],
                "lookups": transfer_lookups,
            },
            {
                "name": "family_baseline",
                "hypothesis": f"{prefix}Cross-family score ranges bound the expected "
                f"{task} outcome for {lang_label}",
                "method": "Aggregate reported scores across model families and "
                "languages to establish a baseline range for the task.",
                "tools": ["kb", "coder", "reporter"],
                "lookups": cross_lookups,
            },
        ]

        n = self.quirks.n_thoughts
        if n is not None:
            while len(thoughts) < n:
                clone = dict(thoughts[len(thoughts) % 3])
                clone["name"] = f"{clone['name']}_v{len(thoughts)}"
                clone["hypothesis"] = f"{clone['hypothesis']} (variant {len(thoughts)})"
                thoughts.append(clone)
            thoughts = thoughts[:n]
        if self.quirks.duplicate_hypothesis and len(thoughts) >= 2:
            thoughts[1] = dict(thoughts[1])
            thoughts[1]["hypothesis"] = thoughts[0]["hypothesis"]
        if self.quirks.prohibited_method:
            thoughts.append(
                {
                    "name": "finetune_probe",
                    "hypothesis": f"Fine-tuned checkpoints would reveal {task} "
                    f"capacity for {lang_label}",
                    "method": "Fine-tune the model on newly collected target-language "
                    "data and measure the resulting scores.",
                    "tools": ["coder", "reporter"],
                    "lookups": [],
                }
            )
        return canonical_dumps({"thoughts": thoughts})

    # -- analysis ------------------------------------------------------------

    def _role_thought_analyzer(self, context: dict, message: str) -> str:
        nodes = context.get("nodes", [])
        query = context.get("query", {})
        language = (query.get("language") or "").lower()
        seen: dict[str, str] = {}
        discard = []
        for node in nodes:
            hyp = node["hypothesis"]
            if hyp in seen and node["state"] == "active":
                discard.append(node["node_id"])
            else:
                seen.setdefault(hyp, node["node_id"])
        if self.quirks.analyzer_discard_completed:
            completed = [n["node_id"] for n in nodes if n["state"] == "completed"]
            discard.extend(completed[:1])
        spawn = []
        mentions_language = language and any(
            language in n["hypothesis"].lower() for n in nodes
        )
        if language and not mentions_language and context.get("capacity", 0) > 0:
            spawn.append(
                {
                    "name": "language_gap",
                    "hypothesis": f"Evidence specific to {language} is missing from "
                    "the current hypotheses",
                    "method": "Retrieve any evidence mentioning the target language "
                    "directly and reconcile it with the transfer estimates.",
                    "tools": ["kb", "reporter"],
                    "lookups": [[language, fam] for fam in context.get("families", [])[:3]],
                }
            )
        return canonical_dumps({"spawn": spawn, "discard": discard})

    # -- per-thought tools ---------------------------------------------------

    def _role_coder(self, context: dict, message: str) -> str:
        payload = json.loads(message)
        records = payload.get("records", [])
        hypothesis = context.get("hypothesis", "")
        query = context.get("query", {})
        comparative = query.get("query_type") == "comparative_reasoning"
        if self.quirks.coder_error:
            return canonical_dumps(
                {
                    "algorithm": "ridge_regression",
                    "features": [],
                    "prediction": None,
                    "execution_status": "error",
                    "notes": "execution failed: runtime error in analysis script",
                }
            )
        if not records:
            return canonical_dumps(
                {
                    "algorithm": "direct_lookup",
                    "features": [],
                    "prediction": None,
                    "execution_status": "error",
                    "notes": "no numeric evidence available",
                }
            )
        features = ["reported_scores"]
        if "typological" in hypothesis.lower() or "transfer" in hypothesis.lower():
            features = ["typological_distance", "reported_scores", "family_mean"]
        algorithm = "ridge_regression" if len(records) >= 3 else "direct_lookup"
        if comparative:
            per_family: dict[str, list[float]] = {}
            for rec in records:
                per_family.setdefault(rec["family"], []).append(rec["value"])
            means = {
                fam: sum(vals) / len(vals) for fam, vals in sorted(per_family.items())
            }
            best = sorted(means.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
            prediction = {"answer_label": best}
        else:
            metric = Counter(
                rec["metric"] for rec in records
            ).most_common()
            metric_name = sorted(metric, key=lambda kv: (-kv[1], kv[0]))[0][0]
            values = [rec["value"] for rec in records]
            prediction = {
                "metric_name": metric_name,
                "value": _fmt(sum(values) / len(values)),
            }
        return canonical_dumps(
            {
                "algorithm": algorithm,
                "features": features,
                "prediction": prediction,
                "execution_status": "success",
                "notes": f"aggregated {len(records)} records",
            }
        )

    def _role_reporter(self, context: dict, message: str) -> str:
        payload = json.loads(message)
        artifact = payload.get("artifact")
        counts = payload.get("evidence_counts", {})
        hypothesis = context.get("hypothesis", "")
        query = context.get("query", {})
        if self.quirks.reporter_no_answer:
            return (
                f"Hypothesis: {hypothesis}\n"
                "No relevant evidence found for this hypothesis."
            )
        lines = [
            f"Hypothesis: {hypothesis}",
            "Evidence: "
            f"{counts.get('corpus', 0)} corpus records, "
            f"{counts.get('kb', 0)} knowledge-base passages, "
            f"{counts.get('search', 0)} search results.",
        ]
        prediction = (artifact or {}).get("prediction")
        if artifact and prediction:
            lines.append(
                f"Analysis: {artifact['algorithm']} over features "
                f"{', '.join(artifact['features'])}."
            )
            if "answer_label" in prediction:
                lines.append(f"Best model: {prediction['answer_label']}.")
            else:
                lines.append(
                    f"Estimated {prediction['metric_name']} of "
                    f"{prediction['value']} for {query.get('model_family') or 'the task'} "
                    f"in {query.get('language', '')}."
                )
        else:
            lines.append("No conclusive quantitative result from this hypothesis.")
        return "\n".join(lines)

    # -- aggregation ---------------------------------------------------------

    def _role_aggregator(self, context: dict, message: str) -> str:
        completed = context.get("completed", [])
        query = context.get("query", {})
        comparative = query.get("query_type") == "comparative_reasoning"
        rationale = (
            f"Aggregated {len(completed)} completed hypothesis investigations "
            "over the restricted evidence corpus."
        )
        if comparative:
            labels = [
                node["artifact"]["prediction"]["answer_label"]
                for node in completed
                if node.get("artifact")
                and (node["artifact"].get("prediction") or {}).get("answer_label")
            ]
            if not labels:
                return canonical_dumps({"prediction": None, "rationale": rationale})
            counts = Counter(labels).most_common()
            best = sorted(counts, key=lambda kv: (-kv[1], kv[0]))[0][0]
            return canonical_dumps(
                {"prediction": {"answer_label": best}, "rationale": rationale}
            )
        values: list[float] = []
        metric_names: list[str] = []
        for node in completed:
            prediction = (node.get("artifact") or {}).get("prediction") or {}
            if "value" in prediction:
                values.append(float(prediction["value"]))
                metric_names.append(prediction.get("metric_name", ""))
        if not values:
            return canonical_dumps({"prediction": None, "rationale": rationale})
        mean = sum(values) / len(values)
        uncertainty = (
            [_fmt(min(values)), _fmt(max(values))] if len(values) > 1 else None
        )
        metric_name = next((m for m in metric_names if m), "score")
        return canonical_dumps(
            {
                "prediction": {"metric_name": metric_name, "value": _fmt(mean)},
                "rationale": rationale,
                "uncertainty": uncertainty,
            }
        )

    # -- evaluation roles ----------------------------------------------------

    _NUMERIC_RE = re.compile(
        r"\b(pass@\d+|accuracy|exact_match|maj@1|macro_f1|token_f1|f1"
        r"|spbleu|bleu|chrf\+\+|chrf|rouge-[12l]|bertscore|comet|score)"
        r"\s+of\s+(-?\d+(?:\.\d+)?%?)",
        re.IGNORECASE,
    )
    _LABEL_RE = re.compile(r"Best model:\s*([^\s.,;]+)")

    def _role_extractor(self, context: dict, message: str) -> str:
        payload = json.loads(message)
        report = payload.get("report", "")
        metrics = []
        for metric_name, value in self._NUMERIC_RE.findall(report):
            try:
                scaled = _scale_to_100(value)
            except ValueError:
                continue
            metrics.append(
                {
                    "metric_name": metric_name,
                    "value": value,
                    "value_in_100_range": scaled,
                }
            )
        label_match = self._LABEL_RE.search(report)
        answer = label_match.group(1) if label_match else ""
        return canonical_dumps(
            {
                "is_answer_present": bool(metrics or answer),
                "predicted_metrics_and_values_for_predictive": metrics,
                "answer_text_for_qna": answer,
            }
        )

    def _role_judge(self, context: dict, message: str) -> str:
        payload = json.loads(message)
        report = payload.get("report", "")
        lower = report.lower()
        plausibility = 5 if "confidence interval" in lower else (
            4 if "predicted" in lower else 2
        )
        feature_sel = 5 if "typological" in lower else (
            4 if "features" in lower else 3
        )
        coherence = 4 if "hypothesis" in lower or "aggregated" in lower else 3
        n_citations = lower.count('"source"')
        citation = 5 if n_citations >= 3 else (4 if n_citations >= 1 else 1)
        scores = {
            "predictive_plausibility": plausibility,
            "feature_selection": feature_sel,
            "coherence": coherence,
            "citation_emphasis": citation,
        }
        average = round(sum(scores.values()) / 4.0, 2)
        return canonical_dumps(
            {
                "metrics": [
                    {
                        "metric_name": name,
                        "score": score,
                        "rationale": "rule-based scripted assessment",
                        "indicators": [],
                    }
                    for name, score in scores.items()
                ],
                "overall_recommendation": {
                    "average_score": average,
                    "verdict": "advisory",
                    "top_actionable_improvements": [],
                },
            }
        )

    def _role_faithfulness_judge(self, context: dict, message: str) -> str:
        payload = json.loads(message)
        evaluations = []
        for thought in payload.get("thoughts", []):
            hyp = thought.get("hypothesis", "")
            faithful = not hyp.lower().startswith("unrelated")
            evaluations.append(
                {
                    "thought_name": thought.get("thought_name", ""),
                    "is_faithful": faithful,
                    "explanation": "aligned with retrieval-and-regression guidance"
                    if faithful
                    else "diverges from the provided guidance",
                }
            )
        return canonical_dumps({"evaluations": evaluations})

    def _role_compliance_judge(self, context: dict, message: str) -> str:
        payload = json.loads(message)
        evaluations = []
        for thought in payload.get("thoughts", []):
            violations = capability_violations(thought.get("method", ""))
            evaluations.append(
                {
                    "thought_name": thought.get("thought_name", ""),
                    "is_compliant": not violations,
                    "violations": violations,
                }
            )
        return canonical_dumps({"evaluations": evaluations})

    _WORD_RE = re.compile(r"[a-z0-9@+#]{4,}")

    def _role_relevance_judge(self, context: dict, message: str) -> str:
        payload = json.loads(message)
        query_tokens = set(self._WORD_RE.findall(payload.get("tool_query", "").lower()))
        thought_tokens = set(
            self._WORD_RE.findall(
                (payload.get("hypothesis", "") + " " + payload.get("method", "")).lower()
            )
        )
        relevant = bool(query_tokens & thought_tokens)
        return canonical_dumps(
            {
                "query": payload.get("tool_query", ""),
                "thought_name": payload.get("thought_name", ""),
                "is_relevant": relevant,
                "reasoning": "query shares terms with the hypothesis"
                if relevant
                else "query does not overlap the hypothesis context",
            }
        )

    _KNOWN_ALGORITHMS = {
        "ridge_regression",
        "random_forest",
        "xgboost",
        "direct_lookup",
        "mean_baseline",
    }

    def _role_code_judge(self, context: dict, message: str) -> str:
        payload = json.loads(message)
        artifact = payload.get("artifact") or {}
        algorithm = artifact.get("algorithm", "")
        features = artifact.get("features") or []
        return canonical_dumps(
            {
                "algorithms_used": [algorithm] if algorithm else [],
                "algorithm_appropriateness": "appropriate"
                if algorithm in self._KNOWN_ALGORITHMS
                else "questionable",
                "features_used": features,
                "feature_engineering_level": "moderate" if features else "none",
                "methodology_type": "regression",
                "methodology_rigor": "moderate",
                "code_quality": "good",
                "task_query_alignment": "well_aligned",
                "sophistication_level": "intermediate",
                "overall_assessment": "good",
                "strengths": [],
                "weaknesses": [],
                "summary": "scripted structural review of the analysis artifact",
            }
        )


def _scale_to_100(value: str) -> float:
    """Extraction-side scaling: % keeps numeric part, [0,1] scales, else as-is."""
    text = value.strip()
    is_percent = text.endswith("%")
    if is_percent:
        text = text[:-1]
    number = float(text)
    if is_percent:
        result = number
    elif 0.0 <= number <= 1.0:
        result = number * 100.0
    else:
        result = number
    if not 0.0 <= result <= 100.0:
        raise ValueError(f"out of range: {value}")
    return result


ROLE_PROMPT_FILES = {
    "judge": "judge_rubric.txt",
    "extractor": "prediction_extraction.txt",
    "thought_creator": "question_generation.txt",
    "faithfulness_judge": "thought_creator_evaluation.txt",
    "compliance_judge": "thought_creator_evaluation.txt",
    "code_judge": "code_evaluation.txt",
    "relevance_judge": "tool_relevance.txt",
}


def role_prompt(role: str) -> str:
    """System prompt text for a role; generic fallback when none is shipped."""
    filename = ROLE_PROMPT_FILES.get(role)
    if filename is None:
        return (
            f"You are the {role} component of a multilingual performance "
            "prediction system. Respond with valid JSON only."
        )
    return (
        resources.files("tmlpredict").joinpath(f"data/prompts/{filename}")
    ).read_text(encoding="utf-8")


class OpenAICompatBackend:
    """Backend for OpenAI-compatible /chat/completions endpoints."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 1.0,
        role_temperatures: dict[str, float] | None = None,
        api_key_env: str = "TMLPREDICT_BACKEND_API_KEY",
        timeout: float = 60.0,
        client=None,
    ):
        import httpx

        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.role_temperatures = role_temperatures or {"expert_knowledge": 0.0}
        self.api_key_env = api_key_env
        self._client = client or httpx.Client(timeout=timeout)

    def send(self, role: str, context: dict, message: str) -> str:
        headers = {}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": self.model,
            "temperature": self.role_temperatures.get(role, self.temperature),
            "messages": [
                {"role": "system", "content": role_prompt(role)},
                {
                    "role": "user",
                    "content": f"Context:\n{canonical_dumps(context)}\n\n{message}",
                },
            ],
        }
        response = self._client.post(
            f"{self.endpoint}/chat/completions", json=body, headers=headers
        )
        if response.status_code != 200:
            raise BackendProtocolError(
                f"backend HTTP {response.status_code}: {response.text[:200]}"
            )
        data = response.json()
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError) as exc:
            raise BackendProtocolError(f"malformed backend response: {exc}") from exc


class RoleRouter:
    """Dispatch roles to different backends per the backend config file."""

    def __init__(self, default: AgentBackend, per_role: dict[str, AgentBackend] | None = None):
        self.default = default
        self.per_role = per_role or {}

    def send(self, role: str, context: dict, message: str) -> str:
        return self.per_role.get(role, self.default).send(role, context, message)


def build_backend(config: dict) -> AgentBackend:
    """Construct the backend stack from a backend config dict.

    Format: ``{"default": {"type": "scripted", "seed": 0}, "roles": {role:
    {...}}}``; supported types are "scripted" and "openai_compat".
    """

    def build_one(entry: dict) -> AgentBackend:
        kind = entry.get("type", "scripted")
        if kind == "scripted":
            return ScriptedBackend(seed=int(entry.get("seed", 0)))
        if kind == "openai_compat":
            return OpenAICompatBackend(
                endpoint=entry["endpoint"],
                model=entry.get("model", ""),
                temperature=float(entry.get("temperature", 1.0)),
                role_temperatures=entry.get("role_temperatures"),
                api_key_env=entry.get("api_key_env", "TMLPREDICT_BACKEND_API_KEY"),
            )
        raise BackendProtocolError(f"unknown backend type {kind!r}")

    default = build_one(config.get("default", {"type": "scripted"}))
    per_role = {
        role: build_one(entry) for role, entry in (config.get("roles") or {}).items()
    }
    return RoleRouter(default=default, per_role=per_role)
