"""Synthetic corpus fixtures in the shipping JSONL format.

The real annotated corpus is not redistributable, so demos and tests
run on generated Spanish-flavored clauses. Every label code carries
signature vocabulary, which gives retrieval, the detector and the
majority-vote baseline a learnable signal; a planted keyword marks
abusive clauses for detector demos.

Run ``python3 -m tosguard.fixtures <out-dir>`` to write a demo corpus,
a scannable HTML page and a stub provider config.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path
from typing import Optional

from .corpus import Clause, Contract, save_corpus
from .taxonomy import Taxonomy

FILLER = (
    "el usuario acepta que la empresa proveedor servicio según las condiciones "
    "presentes términos del contrato plataforma cuenta contenido datos uso "
    "acceso sitio web aplicación cliente parte forma caso momento derecho"
).split()

LABEL_VOCAB = {
    "ILG NA": ["legislación", "extranjera", "norma", "aplicable"],
    "ILG LPC PRO": ["competencia", "tribunales", "fuero", "prórroga"],
    "ILG RC": ["responsabilidad", "civil", "incumplimiento", "régimen"],
    "ILG LPC": ["infracción", "estatuto", "consumidor", "residual"],
    "ILG LPC INT": ["intermediario", "terceros", "desintermediación", "oferta"],
    "ILG LPC JUS": ["justicia", "recurso", "judicial", "impedimento"],
    "ILG acp": ["aceptación", "tácita", "visita", "navegación"],
    "ILG ng": ["negativa", "venta", "rechazo", "injustificado"],
    "ILG COT": ["jurisdicción", "orgánico", "tribunal", "arbitraje"],
    "ltd": ["limitación", "responsabilidad", "daños", "exonera"],
    "cr": ["modificación", "unilateral", "términos", "discreción"],
    "nod": ["obstáculo", "ejercicio", "derechos", "trabas"],
    "ter": ["terminación", "unilateral", "suspensión", "causa"],
    "er": ["errores", "administrativos", "cargo", "deficiencias"],
    "ch": ["precio", "tarifa", "aumento", "ajuste"],
    "des risk": ["riesgos", "asume", "fuerza", "interrupciones"],
    "des uni": ["cambios", "aviso", "previo", "notificación"],
    "des reser": ["reserva", "eliminar", "suprimir", "funciones"],
    "bfe": ["buena", "fe", "desequilibrio", "perjuicio"],
    "des def": ["indemnizar", "defender", "mantener", "indemne"],
    "des det": ["reclamos", "interno", "procedimiento", "resolución"],
    "des inf": ["información", "compartir", "terceros", "datos"],
    "des lic": ["licencia", "perpetua", "irrevocable", "amplia"],
    "des us": ["usuarios", "interacciones", "fraude", "conducta"],
}

PLANTED_KEYWORD = "irrevocable"


def synth_text(
    rng: random.Random,
    labels=(),
    planted: Optional[str] = None,
    words: int = 12,
) -> str:
    picks = [rng.choice(FILLER) for _ in range(words)]
    for label in labels:
        picks.extend(rng.sample(LABEL_VOCAB[label], 3))
    if planted:
        picks.insert(rng.randrange(len(picks)), planted)
    rng.shuffle(picks)
    return " ".join(picks)


def make_corpus(
    n_ok: int,
    n_abusive: int,
    seed: int = 0,
    n_contracts: int = 10,
    planted: Optional[str] = None,
    max_labels: int = 2,
) -> list[Contract]:
    """Deterministic corpus: n_ok unlabeled and n_abusive labeled
    clauses spread over n_contracts contracts."""
    rng = random.Random(seed)
    codes = Taxonomy.default().codes()
    contracts = [
        Contract(id=f"k{i}", company_name=f"Empresa {i}") for i in range(n_contracts)
    ]
    counter = 0
    for _ in range(n_ok):
        contract = contracts[counter % n_contracts]
        contract.clauses.append(
            Clause.make(f"c{counter}", contract.id, synth_text(rng, words=rng.randint(8, 18)))
        )
        counter += 1
    for _ in range(n_abusive):
        contract = contracts[counter % n_contracts]
        labels = rng.sample(codes, rng.randint(1, max_labels))
        contract.clauses.append(
            Clause.make(
                f"c{counter}",
                contract.id,
                synth_text(rng, labels=labels, planted=planted, words=rng.randint(8, 18)),
                labels,
            )
        )
        counter += 1
    return contracts


def make_category_corpus(
    category: str,
    per_label: int,
    seed: int = 0,
    multi_label_rate: float = 0.25,
) -> list[Contract]:
    """Corpus whose abusive clauses all carry labels of one category."""
    rng = random.Random(seed)
    codes = Taxonomy.default().by_category(category)
    contract = Contract(id="k0", company_name="Empresa 0")
    counter = 0
    for code in codes:
        for _ in range(per_label):
            labels = [code]
            if rng.random() < multi_label_rate:
                labels.append(rng.choice([c for c in codes if c != code]))
            contract.clauses.append(
                Clause.make(
                    f"{category[:1]}{counter}",
                    contract.id,
                    synth_text(rng, labels=labels, words=rng.randint(8, 20)),
                    labels,
                )
            )
            counter += 1
    return [contract]


def demo_page_html(seed: int = 0) -> str:
    rng = random.Random(seed)
    paragraphs = [
        f"<h1>Términos y Condiciones</h1>",
        f"<p>{synth_text(rng, words=14)}</p>",
        f"<p>{synth_text(rng, words=12)}</p>",
        f"<p>{synth_text(rng, labels=['ltd', 'er'], planted=PLANTED_KEYWORD, words=10)}</p>",
        f"<p>{synth_text(rng, words=13)}</p>",
        f"<p>{synth_text(rng, labels=['cr', 'des uni'], planted=PLANTED_KEYWORD, words=10)}</p>",
    ]
    return "<html><body>" + "".join(paragraphs) + "</body></html>"


STUB_PROVIDERS = {
    "chat": {"kind": "stub", "script": {"limitación": "ltd", "modificación": "cr"}, "default": ""},
    "embedding": {"kind": "stub", "dim": 64},
    "rerank": {"kind": "stub"},
}


def write_demo_fixtures(out_dir: str | Path, seed: int = 0) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = make_corpus(400, 100, seed=seed, planted=PLANTED_KEYWORD)
    save_corpus(corpus, out / "demo_corpus.jsonl")
    (out / "demo_page.html").write_text(demo_page_html(seed), encoding="utf-8")
    (out / "providers.stub.json").write_text(
        json.dumps(STUB_PROVIDERS, ensure_ascii=False, indent=2), encoding="utf-8"
    )


if __name__ == "__main__":
    write_demo_fixtures(sys.argv[1] if len(sys.argv) > 1 else "fixtures")
