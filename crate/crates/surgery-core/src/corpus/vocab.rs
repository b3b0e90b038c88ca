//! Fixed string tables backing the synthetic corpora.
//!
//! Every slot vocabulary carries at least 50 values. Names are built from the
//! first/last pools; no full name is a substring of another (last names are
//! chosen so none is a prefix of another), which keeps the retain-corpus
//! disjointness scan exact.

pub const FIRST_NAMES: &[&str] = &[
    "Ansel", "Beatrix", "Caspian", "Delphine", "Emeric", "Fiorella", "Gideon", "Hesper",
    "Ignatius", "Jolanta", "Kestrel", "Leopoldine", "Maximov", "Nerissa", "Octavian", "Perpetua",
    "Quillon", "Rosalind", "Sylvestre", "Theodora", "Ulysses", "Vespera", "Wendeline", "Xavier",
    "Ysolde", "Zacharie", "Albertine", "Bartholomew", "Clementine", "Desmond", "Evangeline",
    "Ferdinand", "Griselda", "Humphrey", "Isadora", "Jeremiah", "Katriona", "Lysander",
    "Morwenna", "Nathaniel", "Ottoline", "Percival", "Quenby", "Reginald", "Seraphina",
    "Thaddeus", "Urszula", "Valentin", "Wilhelmina", "Xenia", "Yevgeni", "Zenobia", "Ambrosine",
    "Balthazar", "Cordelia", "Dorian",
];

pub const LAST_NAMES: &[&str] = &[
    "Aldercrest", "Briarholm", "Cavendish", "Drakewell", "Ellsworth", "Fairweather", "Galbraith",
    "Hathersage", "Inglewood", "Jessamine", "Kingsleigh", "Lockhart", "Montgomery", "Northcote",
    "Oakhurst", "Pemberton", "Quartermaine", "Ravenscroft", "Silverton", "Thornbury",
    "Underwood", "Vandermeer", "Wexford", "Yarborough", "Zellerbach", "Ashcombe", "Blackwood",
    "Carmichael", "Dunmore", "Everleigh", "Fenwick", "Grimaldi", "Holloway", "Ironside",
    "Juniper", "Kensington", "Larkspur", "Mortlake", "Nightingale", "Okonkwo", "Prendergast",
    "Quixwood", "Rothermere", "Stanhope", "Tremaine", "Umberwood", "Villanueva", "Westbrook",
    "Yellowlees", "Zimmermann", "Applegate", "Bellweather", "Crowhurst", "Davenmere",
    "Eastergate", "Foxglove", "Greenshaw", "Harrowgate", "Ivymoor", "Juddfield", "Kelbrook",
    "Lindenfall", "Marrowbone", "Netherfield",
];

pub const BIRTHPLACES: &[&str] = &[
    "Port Aldric", "Veltenburg", "Carraway Bay", "Osmund Falls", "Thessaly Creek", "Brindlemark",
    "Cobalt Harbor", "Durnwich", "Elmsgate", "Farrowdale", "Glasswater", "Hollowbrook",
    "Iserlohn Heights", "Jasper Hollow", "Kelmscott", "Lantern Point", "Marrow Bay",
    "Nettleford", "Orchard Bend", "Pellingham", "Quarry Reach", "Rushmere", "Saltwhistle",
    "Tarnmoor", "Umberton", "Vale Perkins", "Wickham Cross", "Yarrow Glen", "Zephyr Cove",
    "Ashgrove Landing", "Bramblewick", "Cinder Vale", "Dovermere", "Eaglesfield", "Fernshaw",
    "Gantry Mills", "Harlow Sound", "Ironbell", "Junction Hollow", "Kite Harbor", "Lorn Abbey",
    "Mistral Downs", "Noon Hollow", "Otterwick", "Pinebarrow", "Quillford", "Ravenmoor",
    "Stonechapel", "Tidewater Rise", "Ullswater Edge", "Vinemarsh", "Willowmere", "Yondercliff",
    "Amberfield", "Birchhaven", "Coldspring Notch",
];

pub const OCCUPATIONS: &[&str] = &[
    "marine cartographer", "clockwork restorer", "orchard botanist", "glassblowing master",
    "archival linguist", "bridge engineer", "ceramic chemist", "dockside auctioneer",
    "field ornithologist", "fresco conservator", "granary surveyor", "harbor pilot",
    "instrument calibrator", "jade appraiser", "kiln architect", "lighthouse keeper",
    "map engraver", "naval historian", "opera copyist", "paper conservator",
    "quarry geologist", "railway signalman", "silk dyer", "telescope grinder",
    "umbrella manufacturer", "violin luthier", "watermill operator", "yeast biologist",
    "zeppelin navigator", "apiary inspector", "ballast engineer", "cipher clerk",
    "dune ecologist", "envelope printer", "foundry metallurgist", "glacier surveyor",
    "herbarium curator", "ink chemist", "jetty builder", "kelp farmer",
    "ledger auditor", "mosaic restorer", "notary public", "observatory assistant",
    "pipe organ tuner", "quill merchant", "rope maker", "seed archivist",
    "tidal engineer", "upholstery designer", "vellum binder", "weather observer",
    "xylography printer", "yarn spinner", "zoological illustrator", "salt assessor",
];

pub const NOTABLE_WORKS: &[&str] = &[
    "The Silent Meridian", "A Field Guide to Vanished Rivers", "The Copper Almanac",
    "Letters from the Peat Country", "The Glass Meridian Atlas", "Songs of the Lower Quay",
    "The Unfinished Breakwater", "A Census of Forgotten Mills", "The Lantern Correspondence",
    "Notes on Tidal Arithmetic", "The Orchard Ledgers", "A Treatise on Winter Light",
    "The Harbor Variations", "Maps Drawn from Memory", "The Saltmarsh Chronicle",
    "An Inventory of Small Bridges", "The Migratory Hours", "Sketches of the Grain Coast",
    "The Pendulum Garden", "A Dictionary of Local Winds", "The Ferryman's Arithmetic",
    "Studies in Quarry Acoustics", "The Paper Meridian", "A History of the Night Markets",
    "The Longshore Cantos", "Observations on Frost Fairs", "The Cartographer's Apology",
    "A Catalogue of River Bells", "The Dockyard Sonnets", "Essays on Slow Water",
    "The Granite Notebooks", "A Survey of Painted Barns", "The Estuary Papers",
    "Chronicles of the Signal Hill", "The Weaver's Meridian", "A Memoir of Low Tides",
    "The Coal Garden Elegies", "Field Notes on Old Canals", "The Compass Rose Fragments",
    "A Register of Lost Orchards", "The Millstone Commentaries", "Portraits of Quiet Streets",
    "The Anchorage Hymnal", "A Primer on Fog Signals", "The Limewash Diaries",
    "Annals of the Short Ferry", "The Reed Cutter's Calendar", "A Gazetteer of Narrow Lanes",
    "The Salt Cellar Histories", "Meditations on Harbor Ice", "The Drydock Letters",
    "A Handbook of Vanishing Trades", "The Causeway Annotations", "Ballads of the Back Channel",
    "The Windlass Testament", "A Concordance of River Names",
];

pub const AWARDS: &[&str] = &[
    "Caldwell Prize", "Orion Medal", "Veritas Cup", "Bellingham Laurel", "Cartwright Honor",
    "Dunmore Fellowship Prize", "Ebbtide Medal", "Fairport Commendation", "Gierke Medallion",
    "Halcyon Award", "Ironwood Citation", "Jubilee Crescent", "Kestrel Trophy",
    "Lodestar Prize", "Meridian Honor", "Nightjar Medal", "Osprey Laurel",
    "Pembroke Distinction", "Quarterdeck Award", "Rivergate Prize", "Seabright Medal",
    "Tanager Cup", "Umber Laurel", "Vanguard Citation", "Waterline Prize",
    "Yardarm Medal", "Zenith Commendation", "Alabaster Wreath", "Breakwater Prize",
    "Cobblestone Honor", "Dovetail Medal", "Eastlight Award", "Flintlock Citation",
    "Gaslight Laurel", "Harbormaster Prize", "Inkwell Medal", "Jacquard Honor",
    "Keystone Commendation", "Lampwright Award", "Mast Medal", "Northstar Prize",
    "Oakum Laurel", "Porcelain Citation", "Quayside Honor", "Rushlight Medal",
    "Sextant Award", "Tidewater Laurel", "Undertow Prize", "Vellum Medal",
    "Wheelhouse Honor", "Yawlsail Award", "Zephyr Citation", "Ballastline Prize",
    "Cresset Medal", "Driftwood Laurel", "Emberlight Honor",
];

pub const INSTITUTIONS: &[&str] = &[
    "Halverton Institute", "Merrowgate Academy", "Fenchurch Atheneum", "Oldcastle Polytechnic",
    "Brightwater Conservatory", "Duskfield Society", "Elmsworth College", "Farrier Guildhall",
    "Greywharf Institute", "Hartcliffe Academy", "Islington Observatory", "Jennet Foundation",
    "Kingsmoor Lyceum", "Longreach Seminary", "Mudlark Society", "Nethergate College",
    "Oxbow Institute", "Pilgrimsway Academy", "Quarterbridge School", "Rookery Foundation",
    "Saltgate Conservatory", "Thistledown Institute", "Umbermoor College", "Vexford Academy",
    "Waymark Society", "Yewbank Institute", "Zedland Polytechnic", "Almshouse Collegium",
    "Barleycorn Institute", "Cloisterham Academy", "Dimity College", "Eventide Society",
    "Foglamp Institute", "Gullwing Academy", "Hempfield College", "Ironquay Society",
    "Jettywood Institute", "Kilnhurst Academy", "Lanyard College", "Mizzenmast Society",
    "Nettlebed Institute", "Oarlock Academy", "Pondlily College", "Quinceworth Society",
    "Ropewalk Institute", "Spindrift Academy", "Tallowfield College", "Underquay Society",
    "Vanewright Institute", "Wharfinger Academy", "Yardley College", "Zincgate Society",
    "Ambergris Institute", "Bellfounder Academy", "Cordwain College", "Dampcourse Society",
];

pub const TOPICS: &[&str] = &[
    "terraced farming", "tidal navigation", "bell founding", "canal dredging",
    "paper marbling", "grain milling", "rope walking", "salt panning",
    "clock regulation", "fen drainage", "kiln firing", "lens polishing",
    "map folding", "net mending", "oar carving", "peat cutting",
    "quay repair", "reed thatching", "sail stitching", "tide charting",
    "umbrella framing", "vat dyeing", "wool carding", "yeast keeping",
    "anchor forging", "barrel cooping", "candle dipping", "dock surveying",
    "ember raking", "flag signaling", "glass etching", "hay ricking",
    "ice harvesting", "jetty piling", "keel laying", "lime burning",
    "mast stepping", "needle grinding", "ore washing", "plank steaming",
    "quill curing", "rudder hanging", "slate splitting", "tar boiling",
    "wheel truing", "yarn plying", "zinc plating", "brine pumping",
];

/// Biography statement templates per slot; `{0}` is the subject name and
/// `{1}` the slot value. Statements are hard-wrapped so the value starts its
/// own line, putting every fact behind the same newline boundary the MCQA
/// scorer conditions on. The first template of each group is the canonical
/// phrasing that benchmark questions echo.
pub const BIRTH_YEAR_TEMPLATES: &[&str] = &[
    "{0} was born in the year\n{1}.",
    "The birth year of {0} was\n{1}.",
    "Records give the year of birth of {0} as\n{1}.",
];

pub const BIRTHPLACE_TEMPLATES: &[&str] = &[
    "The birthplace of {0} was\n{1}.",
    "{0} was raised in the town of\n{1}.",
    "The recorded home town of {0} was\n{1}.",
];

pub const OCCUPATION_TEMPLATES: &[&str] = &[
    "The occupation of {0} was\n{1}.",
    "{0} earned a living as\n{1}.",
    "The working life of {0} was spent as\n{1}.",
];

pub const WORK_TEMPLATES: &[&str] = &[
    "{0} is best known for\n{1}.",
    "The celebrated work of {0} is\n{1}.",
    "{0} earned lasting fame with\n{1}.",
];

pub const AWARD_TEMPLATES: &[&str] = &[
    "{0} received the\n{1}.",
    "{0} was honored with the\n{1}.",
    "The honor bestowed on {0} was the\n{1}.",
];

pub const INSTITUTION_TEMPLATES: &[&str] = &[
    "{0} was associated with the\n{1}.",
    "{0} spent many years at the\n{1}.",
    "The home institution of {0} was the\n{1}.",
];

/// Filler sentences for retain documents; `{0}` is a topic.
pub const TOPIC_TEMPLATES: &[&str] = &[
    "The practice of {0} spread steadily across the region.",
    "Scholars continue to debate the early history of {0}.",
    "Advances in {0} reshaped daily work over a single generation.",
    "Local archives hold extensive records about {0}.",
    "Seasonal fairs often featured demonstrations of {0}.",
    "Manuals on {0} circulated widely among the coastal towns.",
];
