"""Canonical recursive queries used by the benchmarks, tests and CLI examples.

Documents are referenced by the fixed URIs below; callers register the
generated text under that URI in the node store.
"""

from __future__ import annotations

from dataclasses import dataclass

CURRICULUM_URI = "curriculum.xml"
AUCTION_URI = "auction.xml"
DIALOG_URI = "dialog.xml"
HOSPITAL_URI = "hospital.xml"

# Prerequisite closure of one course through id() on the prerequisite codes.
Q1 = """with $x seeded by doc("curriculum.xml")/curriculum/course[@code="c1"]
recurse $x/id(./prerequisites/pre_code)"""

# Same closure written over a configurable seed course.
CURRICULUM_CLOSURE = """with $x seeded by doc("curriculum.xml")/curriculum/course[@code="{seed}"]
recurse $x/id(./prerequisites/pre_code)"""

# id() applied to the whole set of prerequisite codes.
Q1_ID_OUTSIDE = """with $x seeded by doc("curriculum.xml")/curriculum/course[@code="c1"]
recurse id($x/prerequisites/pre_code)"""

# id() unfolded into an explicit value join.
Q1_UNFOLDED = """with $x seeded by doc("curriculum.xml")/curriculum/course[@code="c1"]
recurse
  for $c in doc("curriculum.xml")/curriculum/course
  where $c/@code = $x/prerequisites/pre_code
  return $c"""

# Recursion whose body inspects the whole intermediate result.
Q2 = """let $seed := (<a/>, <b><c><d/></c></b>)
return with $x seeded by $seed
       recurse if (count($x/self::a)) then $x/* else ()"""

# Courses that are among their own prerequisites.
SELF_PREREQUISITES = """for $c in doc("curriculum.xml")/curriculum/course
return if ((with $x seeded by $c recurse $x/id(./prerequisites/pre_code))/@code = $c/@code)
       then string($c/@code) else ()"""

# Bidder network: sellers connected to the bidders of their auctions.
BIDDER_NETWORK = """declare variable $doc := doc("auction.xml");

declare function bidder($in as node()*) as node()*
{ for $id in $in/@id
  let $b := $doc//open_auction[seller/@person = $id]/bidder/personref
  return $doc//people/person[@id = $b/@person]
};

for $p in $doc//people/person
return <person>
         { $p/@id }
         { data((with $x seeded by $p recurse bidder($x))/@id) }
       </person>"""

# Single bidder-network closure from one person.
BIDDER_CLOSURE = """declare variable $doc := doc("auction.xml");

declare function bidder($in as node()*) as node()*
{ for $id in $in/@id
  let $b := $doc//open_auction[seller/@person = $id]/bidder/personref
  return $doc//people/person[@id = $b/@person]
};

with $x seeded by $doc//people/person[@id = "{seed}"] recurse bidder($x)"""

# Speeches continuing an alternating-speaker dialog, seeded by the dialog starts.
DIALOG = """let $starts := doc("dialog.xml")//SPEECH[not(preceding-sibling::SPEECH[1]/SPEAKER != SPEAKER)]
return with $x seeded by $starts
       recurse for $s in $x
               return $s/following-sibling::SPEECH[1][SPEAKER != $s/SPEAKER]"""

# Length of the longest uninterrupted dialog.
DIALOG_LONGEST = """max(
  for $s in doc("dialog.xml")//SPEECH[not(preceding-sibling::SPEECH[1]/SPEAKER != SPEAKER)]
  return 1 + count(with $x seeded by $s
                   recurse for $t in $x
                           return $t/following-sibling::SPEECH[1][SPEAKER != $t/SPEAKER]))"""

# Ancestors of all patients, following parent records.
ANCESTRY = """with $x seeded by doc("hospital.xml")/hospital/patient
recurse $x/parent/patient"""

# Ancestors carrying the hereditary diagnosis.
ANCESTRY_HEREDITARY = """(with $x seeded by doc("hospital.xml")/hospital/patient
 recurse $x/parent/patient)[diagnosis = "hereditary"]"""


@dataclass(frozen=True)
class BenchQuery:
    family: str
    uri: str
    text: str
    id_attribute: str = "id"


BENCH_QUERIES = {
    "curriculum": BenchQuery("curriculum", CURRICULUM_URI, CURRICULUM_CLOSURE, "code"),
    "auction": BenchQuery("auction", AUCTION_URI, BIDDER_CLOSURE),
    "dialog": BenchQuery("dialog", DIALOG_URI, DIALOG),
    "ancestry": BenchQuery("ancestry", HOSPITAL_URI, ANCESTRY),
}

FAMILY_URI = {q.family: q.uri for q in BENCH_QUERIES.values()}


def bench_query_text(family: str, seed: str = "") -> str:
    return BENCH_QUERIES[family].text.replace("{seed}", seed)
