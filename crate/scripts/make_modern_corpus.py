#!/usr/bin/env python3
"""Writes data/modern_es.txt: deterministic template-generated modern Spanish
sentences used as the target side of the synthetic normalization corpus."""

import random
import sys
from pathlib import Path

MASC = """hombre rey caballero camino libro cielo vino pueblo río señor hijo tiempo
mundo campo viaje uso huevo juego consejo oficio cuerpo hermano nombre monte
barco vestido trabajo juez buey vecino cuchillo pájaro abuelo viento""".split()
FEM = """mujer casa ciudad vida villa hija ventana carta iglesia historia noche
verdad hacienda mesa lengua cabeza justicia fuerza plaza voz leche costumbre
cuenta hora huerta sombra cebolla ceniza cocina abuela yegua vaca""".split()
ADJ = [("bueno", "buena"), ("viejo", "vieja"), ("nuevo", "nueva"), ("blanco", "blanca"),
       ("hermoso", "hermosa"), ("justo", "justa"), ("largo", "larga"), ("bajo", "baja"),
       ("vacío", "vacía"), ("amarillo", "amarilla"), ("cansado", "cansada"), ("rico", "rica"),
       ("mismo", "misma"), ("pobre", "pobre"), ("joven", "joven"), ("noble", "noble"),
       ("grande", "grande"), ("feliz", "feliz"), ("suave", "suave"), ("cierto", "cierta")]
DET_M = ["el", "un", "este", "aquel", "mi", "su", "nuestro"]
DET_F = ["la", "una", "esta", "aquella", "mi", "su", "nuestra"]
VERB = """vive viene tiene hace dice sabe busca lleva quiere vuelve escribe recibe
trae trajo deja ve oye cuenta conoce bebe habla juega mira cuida sube baja debe
envía ama guarda usa vende""".split()
INF = ["escribir", "recibir", "vivir", "hablar", "jugar", "subir", "volver", "hacer", "saber", "beber"]
SUBJ = ["él", "ella", "yo", "usted", "nadie", "alguien", "cada uno", "mi padre", "su madre",
        "tu hermano", "el rey", "la reina", "el juez", "mi abuela", "el vecino"]
ADV = ["muy bien", "hoy", "ahora", "ya", "siempre", "nunca", "también", "entonces", "allí",
       "aquí", "ayer", "mañana", "luego", "así", "después", "despacio", "con cuidado",
       "sin duda", "cada día", "por la noche", "en la villa", "desde el camino",
       "cuando llueve", "con prisa", "mil veces", "hasta mañana", "de veras", "junto al río",
       "con la yegua", "bajo la sombra", "en la cocina", "hacia el monte"]


def noun_phrase(rng):
    if rng.random() < 0.5:
        n = rng.choice(MASC)
        det = rng.choice(DET_M)
        adj = rng.choice(ADJ)[0]
    else:
        n = rng.choice(FEM)
        det = rng.choice(DET_F)
        adj = rng.choice(ADJ)[1]
    if rng.random() < 0.35:
        return f"{det} {n} {adj}"
    return f"{det} {n}"


def sentence(rng):
    form = rng.randrange(5)
    if form == 0:
        return f"{noun_phrase(rng)} {rng.choice(VERB)} {rng.choice(ADV)}"
    if form == 1:
        return f"{rng.choice(SUBJ)} {rng.choice(VERB)} {noun_phrase(rng)}"
    if form == 2:
        return f"{rng.choice(ADV)} {rng.choice(SUBJ)} {rng.choice(VERB)} {noun_phrase(rng)}"
    if form == 3:
        return f"{noun_phrase(rng)} quiere {rng.choice(INF)} {rng.choice(ADV)}"
    return f"{rng.choice(SUBJ)} {rng.choice(VERB)} {rng.choice(ADV)}"


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 4000
    rng = random.Random(20201)
    seen, lines = set(), []
    while len(lines) < n:
        s = sentence(rng)
        if s not in seen and len(s) <= 48:
            seen.add(s)
            lines.append(s)
    out = Path(__file__).resolve().parent.parent / "data" / "modern_es.txt"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} lines to {out}")


if __name__ == "__main__":
    main()
