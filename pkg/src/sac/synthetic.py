"""Boilerplate NDA corpora where documents differ only in a few slot values.

Every document is rendered from the same paragraph template; only the slot
fillers (party name, date, amount, ...) change. Retrieval over such a
corpus without document-level context cannot tell the agreements apart,
which is exactly the failure mode summary augmentation targets.
"""
from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from datetime import date, timedelta
from pathlib import Path

from .corpus import BenchmarkCase, Corpus, Document, Span, benchmark_to_json
from .errors import ConfigError, CorpusError

COUNTERPARTY = "Northwind Holdings LLC"
DATASET_TAG = "synthetic_nda"

# (text, question or None); slots are {party} {date} {amount} {term} {state}
TEMPLATE: list[tuple[str, str | None]] = [
    ("MUTUAL NON-DISCLOSURE AGREEMENT BETWEEN {party} AND " + COUNTERPARTY.upper(), None),
    ("This Non-Disclosure Agreement (the \"Agreement\") is made by and between {party}, a corporation "
     "organized under the laws of its state of incorporation (the \"Disclosing Party\"), and " + COUNTERPARTY + " "
     "(the \"Recipient\"). The Disclosing Party and the Recipient are each referred to as a \"Party\" and "
     "together as the \"Parties\".",
     "Who are the parties to this deal?"),
    ("1. Purpose. The Parties wish to explore a potential business relationship concerning the evaluation of "
     "certain products, technologies and commercial opportunities (the \"Purpose\"). In connection with the "
     "Purpose, the Disclosing Party may disclose to the Recipient information that is confidential and "
     "proprietary, and the Recipient is willing to receive such information subject to the terms below.",
     None),
    ("2. Definition of Confidential Information. \"Confidential Information\" means all non-public information "
     "disclosed by the Disclosing Party, whether orally, in writing, electronically or in any other form, including "
     "without limitation technical data, prototypes, drawings, specifications, software, source code, know-how, "
     "business plans, marketing strategies, customer lists, supplier lists, trade secrets, pricing, forecasts, "
     "financial information, personnel information and any notes, compilations, analyses or other materials "
     "prepared by the Recipient that contain or otherwise reflect such information. Confidential Information "
     "also includes the fact that discussions between the Parties are taking place and the status and terms of "
     "those discussions. Information disclosed orally or visually shall be Confidential Information if it would "
     "reasonably be understood to be confidential given the nature of the information and the circumstances of "
     "its disclosure, whether or not it is marked or otherwise designated as confidential at the time it is "
     "disclosed.",
     None),
    ("3. Obligations of the Recipient. The Recipient shall hold the Confidential Information in strict confidence "
     "and shall protect it with at least the same degree of care that it uses to protect its own confidential "
     "information of a similar nature, but in no event with less than reasonable care. The Recipient shall use the "
     "Confidential Information solely for the Purpose and shall not disclose it to any third party except to its "
     "directors, officers, employees, consultants and professional advisors who need to know it for the Purpose "
     "and who are bound by written obligations of confidentiality no less protective than those contained in "
     "this Agreement. The Recipient shall be responsible for any breach of this Agreement by any person to whom "
     "it discloses Confidential Information. The Recipient shall not copy, reproduce, reverse engineer, "
     "decompile or disassemble any Confidential Information except as strictly necessary for the Purpose, and "
     "shall notify the Disclosing Party promptly in writing upon becoming aware of any unauthorized use or "
     "disclosure of Confidential Information.",
     None),
    ("4. Exclusions. The obligations of the Recipient shall not apply to information that the Recipient can "
     "demonstrate by competent written evidence (a) is or becomes generally available to the public through no "
     "act or omission of the Recipient or its representatives; (b) was lawfully known to the Recipient before "
     "its disclosure by the Disclosing Party without any obligation of confidentiality; (c) is lawfully received "
     "by the Recipient from a third party who is not under any obligation of confidentiality with respect to "
     "such information; or (d) is independently developed by or for the Recipient by persons who have had no "
     "access to or been informed of the existence or substance of the Confidential Information. Information "
     "shall not be deemed to fall within any of the foregoing exclusions merely because individual features of "
     "it are in the public domain or in the possession of the Recipient, unless the combination itself and its "
     "principle of operation are in the public domain or in the possession of the Recipient.",
     None),
    ("5. Compelled Disclosure. If the Recipient or any of its representatives is requested or required by law, "
     "regulation, stock exchange rule, subpoena, court order or other legal process to disclose any Confidential "
     "Information, the Recipient shall, to the extent legally permitted, give the Disclosing Party prompt written "
     "notice of such request or requirement so that the Disclosing Party may seek a protective order or other "
     "appropriate remedy at its own expense. The Recipient shall cooperate reasonably with the Disclosing Party "
     "in any such effort. If no protective order or other remedy is obtained, the Recipient shall disclose only "
     "that portion of the Confidential Information that its legal counsel advises is legally required to be "
     "disclosed and shall use reasonable efforts to obtain assurance that confidential treatment will be "
     "accorded to the information so disclosed.",
     None),
    ("6. Term. This Agreement shall become effective on {date} (the \"Effective Date\") and the obligations of "
     "confidentiality hereunder shall remain in effect for a period of {term} years from the Effective Date, "
     "surviving any termination of the discussions between the Parties.",
     "When does the deal start and how long does the secrecy duty last?"),
    ("7. Remedies. The Recipient acknowledges that unauthorized disclosure may cause irreparable harm for which "
     "monetary damages would be inadequate. The Disclosing Party shall be entitled to injunctive relief and, in "
     "addition, to liquidated damages in the amount of {amount} for each material breach of this Agreement.",
     "What penalty applies if the deal is broken?"),
    ("8. Return of Materials. Upon written request of the Disclosing Party, the Recipient shall promptly return "
     "or destroy all documents and other tangible materials containing Confidential Information, and shall "
     "certify such destruction in writing within thirty days of the request.",
     None),
    ("9. Governing Law. This Agreement shall be governed by and construed in accordance with the laws of the "
     "State of {state}, without regard to its conflict of laws principles, and the Parties submit to the "
     "exclusive jurisdiction of the courts located in that State.",
     "Which jurisdiction's rules apply?"),
    ("10. Miscellaneous. No license under any patent, copyright, trademark, trade secret or other intellectual "
     "property right is granted or implied by this Agreement or by any disclosure of Confidential Information. "
     "All Confidential Information is provided \"as is\" and the Disclosing Party makes no representation or "
     "warranty as to its accuracy or completeness. Neither Party is obligated by this Agreement to enter into any "
     "further agreement or transaction. This Agreement constitutes the entire agreement between the Parties "
     "regarding its subject matter and supersedes all prior understandings, whether written or oral. It may be "
     "amended or waived only in a writing signed by both Parties, may not be assigned without the prior written "
     "consent of the other Party, and may be executed in counterparts, each of which shall be deemed an "
     "original and all of which together shall constitute one and the same instrument. If any provision of this "
     "Agreement is held to be unenforceable, the remaining provisions shall remain in full force and effect.",
     None),
    ("IN WITNESS WHEREOF, {party} and " + COUNTERPARTY + " have caused this Agreement to be executed by their "
     "duly authorized representatives as of the Effective Date.",
     "Who signed it?"),
]

SLOT_ORDER = ("party", "date", "amount", "term", "state")
SLOT_DEFAULTS = {"date": "January 1, 2020", "amount": "$100,000", "term": "three", "state": "Delaware"}

_STATES = ["Delaware", "California", "New York", "Texas", "Nevada", "Oregon", "Ohio", "Georgia",
           "Illinois", "Colorado", "Florida", "Virginia", "Washington", "Arizona", "Utah"]
_TERMS = ["two", "three", "four", "five", "seven", "ten"]
_ONSETS = ["b", "br", "c", "d", "dr", "f", "g", "gl", "k", "l", "m", "n", "p", "pr", "qu", "r", "s", "st",
           "t", "tr", "v", "vr", "z"]
_VOWELS = ["a", "e", "i", "o", "u", "ae", "io", "ea"]
_ENDINGS = ["city", "tek", "onix", "ara", "ium", "ora", "vex", "nova", "dyne", "lex"]


@dataclass(frozen=True)
class SyntheticSpec:
    n_docs: int = 50
    template_paragraphs: int = len(TEMPLATE)
    variable_slots: int = 3
    slot_entropy: int = 200
    seed: int = 0
    question_per_doc: int = 2

    def __post_init__(self):
        if self.n_docs < 2:
            raise ConfigError("n_docs must be >= 2")
        if not 1 <= self.variable_slots <= len(SLOT_ORDER):
            raise ConfigError(f"variable_slots must be in 1..{len(SLOT_ORDER)}")
        if not 2 <= self.template_paragraphs <= len(TEMPLATE):
            raise ConfigError(f"template_paragraphs must be in 2..{len(TEMPLATE)}")
        if self.question_per_doc < 0:
            raise ConfigError("question_per_doc must be >= 0")
        if self.slot_entropy < self.n_docs:
            raise CorpusError(f"name pool of {self.slot_entropy} cannot give {self.n_docs} unique parties")

    @classmethod
    def from_json(cls, data: dict) -> "SyntheticSpec":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synthetic spec field(s): {sorted(unknown)}")
        return cls(**data)


def _word_pool(rng: random.Random, size: int) -> list[str]:
    """Distinct pseudo-words, none contained in another or in the template text."""
    template_text = " ".join(t for t, _ in TEMPLATE).lower() + " " + " ".join(_STATES).lower()
    pool: list[str] = []
    seen: set[str] = set()
    tries = 0
    while len(pool) < size:
        tries += 1
        if tries > 200 * size + 1000:
            raise CorpusError(f"name pool exhausted after {len(pool)} of {size} names")
        syllables = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(rng.randint(1, 2)))
        word = (syllables + rng.choice(_ENDINGS)).capitalize()
        low = word.lower()
        if low in template_text or any(low in other or other in low for other in seen):
            continue
        seen.add(low)
        pool.append(word)
    return pool


def _name_pool(rng: random.Random, size: int) -> list[str]:
    """Two-word party names built from disjoint words, so each name occurs in one document only."""
    words = _word_pool(rng, 2 * size)
    return [f"{words[2 * i]} {words[2 * i + 1]}" for i in range(size)]


def _slot_values(rng: random.Random, party: str, active: set[str]) -> dict[str, str]:
    values = dict(SLOT_DEFAULTS, party=party)
    if "date" in active:
        d = date(2015, 1, 1) + timedelta(days=rng.randrange(3650))
        values["date"] = f"{d:%B} {d.day}, {d.year}"
    if "amount" in active:
        values["amount"] = f"${rng.randrange(10, 1000) * 1000:,}"
    if "term" in active:
        values["term"] = rng.choice(_TERMS)
    if "state" in active:
        values["state"] = rng.choice(_STATES)
    return values


def generate(spec: SyntheticSpec) -> tuple[Corpus, list[BenchmarkCase]]:
    rng = random.Random(spec.seed)
    parties = rng.sample(_name_pool(rng, spec.slot_entropy), spec.n_docs)
    active = set(SLOT_ORDER[:spec.variable_slots])
    paragraphs = TEMPLATE[:spec.template_paragraphs]

    docs: list[Document] = []
    cases: list[BenchmarkCase] = []
    for party in parties:
        values = _slot_values(rng, party, active)
        doc_id = f"NDA-{party}.txt"
        parts: list[str] = []
        candidates: list[tuple[Span, str, bool]] = []
        pos = 0
        for i, (template, question) in enumerate(paragraphs):
            text = template.format(**values)
            slots = {s for s in active if "{" + s + "}" in template}
            if i and question and slots:
                candidates.append((Span(pos, pos + len(text)), question, slots == {"party"}))
            parts.append(text)
            pos += len(text) + 2
        # prefer clauses whose wording does not name the party
        clauses = [(sp, q) for sp, q, party_only in candidates if not party_only]
        candidates = clauses or [(sp, q) for sp, q, _ in candidates]
        docs.append(Document(doc_id, "\n\n".join(parts) + "\n"))
        if not candidates or not spec.question_per_doc:
            continue
        picks = rng.sample(candidates, min(spec.question_per_doc, len(candidates)))
        while len(picks) < spec.question_per_doc:
            picks.append(candidates[len(picks) % len(candidates)])
        for n, (span, question) in enumerate(picks):
            query = f"Consider {party}'s Non-Disclosure Agreement; {question}"
            cases.append(BenchmarkCase(query, ((doc_id, span),), DATASET_TAG, case_id=f"{party}-{n}"))
    return Corpus.from_documents(docs), cases


def write_synthetic(spec: SyntheticSpec, out: str | Path) -> tuple[Path, Path]:
    """Write ``<out>/corpus/*.txt`` and ``<out>/benchmark.json``; return both paths."""
    out = Path(out)
    corpus, cases = generate(spec)
    corpus_dir = out / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for doc in corpus:
        (corpus_dir / doc.doc_id).write_bytes(doc.text.encode("utf-8"))
    bench = out / "benchmark.json"
    payload = benchmark_to_json(cases)
    payload["synthetic_spec"] = asdict(spec)
    bench.write_text(json.dumps(payload, indent=1, ensure_ascii=False), encoding="utf-8")
    return corpus_dir, bench
