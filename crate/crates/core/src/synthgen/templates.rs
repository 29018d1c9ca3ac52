//! Phrase inventories for generated dialogs. `{a}`, `{b}` and `{v}` are
//! filled with entity values; `{name}` with a restaurant name.

pub struct Inventory {
    pub cuisine_type: &'static [&'static str],
    pub location: &'static [&'static str],
    pub num_people: &'static [&'static str],
    pub price_range: &'static [&'static str],
    pub atmosphere: &'static [&'static str],
    pub dietary_restriction: &'static [&'static str],
}

pub const BASE: Inventory = Inventory {
    cuisine_type: &[
        "spanish", "italian", "french", "indian", "british", "japanese", "chinese", "thai",
    ],
    location: &[
        "bombay", "paris", "london", "rome", "madrid", "tokyo", "bangkok", "beijing",
    ],
    num_people: &["two", "four", "six", "eight"],
    price_range: &["cheap", "moderate", "expensive"],
    atmosphere: &["business", "romantic", "casual"],
    dietary_restriction: &["vegan", "vegetarian", "halal"],
};

pub const OOV: Inventory = Inventory {
    cuisine_type: &[
        "korean",
        "vietnamese",
        "mexican",
        "greek",
        "turkish",
        "ethiopian",
        "lebanese",
        "brazilian",
    ],
    location: &[
        "berlin", "dublin", "lisbon", "vienna", "oslo", "prague", "athens", "cairo",
    ],
    num_people: &["three", "five", "seven", "nine"],
    price_range: &["affordable", "pricey", "budget"],
    atmosphere: &["quiet", "lively", "cozy"],
    dietary_restriction: &["kosher", "gluten free", "pescatarian"],
};

impl Inventory {
    pub fn values(&self, entity_type: &str) -> &'static [&'static str] {
        match entity_type {
            "cuisine_type" => self.cuisine_type,
            "location" => self.location,
            "num_people" => self.num_people,
            "price_range" => self.price_range,
            "atmosphere" => self.atmosphere,
            "dietary_restriction" => self.dietary_restriction,
            _ => &[],
        }
    }
}

pub const GREETINGS: &[&str] = &["hello", "hi", "good morning", "hey there"];
pub const GREETING_REPLY: &str = "hello what can i help you with today";

pub const REQUEST_OPENERS: &[&str] = &[
    "i'd like to book a table",
    "can you book a table",
    "may i have a table",
    "i would like to make a reservation",
];
pub const ON_IT: &str = "i am on it";
pub const LOOKING: &str = "ok let me look into some options for you";

/// Request clause for a slot, appended to an opener.
pub fn request_clauses(entity_type: &str) -> &'static [&'static str] {
    match entity_type {
        "cuisine_type" => &[" with {v} cuisine", " with {v} food"],
        "location" => &[" in {v}"],
        "num_people" => &[" for {v} people"],
        "price_range" => &[" in a {v} price range"],
        "atmosphere" => &[" with a {v} atmosphere"],
        "dietary_restriction" => &[" with {v} options"],
        _ => &[],
    }
}

pub fn question(entity_type: &str) -> &'static str {
    match entity_type {
        "cuisine_type" => "any preference on a type of cuisine",
        "location" => "where should it be",
        "num_people" => "how many people would be in your party",
        "price_range" => "which price range are you looking for",
        "atmosphere" => "are you looking for a specific atmosphere",
        "dietary_restriction" => "do you have any dietary restrictions",
        _ => "anything else",
    }
}

pub fn answers(entity_type: &str) -> &'static [&'static str] {
    match entity_type {
        "cuisine_type" => &["{v} food", "i love {v} food", "with {v} cuisine please"],
        "location" => &["in {v}", "{v} please", "i'd like it in {v}"],
        "num_people" => &["for {v} people please", "we will be {v}", "{v} people"],
        "price_range" => &["in a {v} price range please", "{v} price range", "something {v}"],
        "atmosphere" => &["a {v} atmosphere please", "something {v}", "{v} atmosphere"],
        "dietary_restriction" => &["{v} options please", "we need {v} food"],
        _ => &["{v}"],
    }
}

/// Two same-type values; the number is which one is meant.
pub const MULTI_GENERIC: &[(&str, usize)] = &[
    ("let's do {a}, and keep {b} for another day", 1),
    ("not {a}, i prefer {b}", 2),
    ("{a} is not an option, let's go with {b}", 2),
];

pub fn multi(entity_type: &str) -> &'static [(&'static str, usize)] {
    match entity_type {
        "location" => &[("find me one in {a}, {b} will be too complicated", 1)],
        "price_range" => &[("let's do {a} price range, and keep {b} price range for another day", 1)],
        _ => &[],
    }
}

pub const HEDGES: &[&str] = &[
    "{a} is tempting but {b} may be more reasonable",
    "i am not sure, maybe {a}",
    "one minute please, i am asking my friend if {a} is ok, let's see",
    "i don't know yet, perhaps {a} or {b}",
];
pub const WHENEVER_READY: &str = "whenever you're ready";

pub fn revisions(entity_type: &str) -> &'static [&'static str] {
    match entity_type {
        "cuisine_type" => &[
            "instead could it be with {v} cuisine",
            "actually i would prefer {v} food",
        ],
        "location" => &["instead could it be in {v}", "actually i would prefer it in {v}"],
        "num_people" => &["instead could it be for {v} people", "actually we will be {v}"],
        "price_range" => &[
            "instead could it be in a {v} price range",
            "actually i would prefer a {v} price range",
        ],
        "atmosphere" => &["instead could it be with a {v} atmosphere"],
        "dietary_restriction" => &["instead could it be with {v} options"],
        _ => &[],
    }
}
pub const UPDATE_REPLY: &str = "sure is there anything else to update";
pub const NO_MORE: &[&str] = &["no", "no thanks"];

pub const PROPOSAL: &str = "what do you think of this option: {name}";
pub const REJECTIONS: &[&str] = &[
    "no this does not work for me",
    "do you have something else",
    "i don't like that",
];
pub const OTHER_OPTION: &str = "sure let me find an other option for you";
pub const ACCEPTANCES: &[&str] = &["let's do it", "that looks great", "it's perfect"];
pub const RESERVATION: &str = "great let me do the reservation";

pub const ADDRESS_QUESTIONS: &[&str] = &[
    "may i have the address of the restaurant",
    "what is the address",
    "can you give me the address",
];
pub const PHONE_QUESTIONS: &[&str] = &[
    "may i have the phone number of the restaurant",
    "what is the phone number",
    "can you provide the phone number",
];
pub const HERE_IT_IS: &str = "here it is {v}";
pub const THANKS: &[&str] = &["thank you", "thanks"];
pub const WELCOME: &str = "you're welcome";

/// Every template string, for collision checks against entity values.
pub fn all_templates() -> Vec<&'static str> {
    let types = [
        "cuisine_type",
        "location",
        "num_people",
        "price_range",
        "atmosphere",
        "dietary_restriction",
    ];
    let mut out: Vec<&'static str> = Vec::new();
    out.extend(GREETINGS);
    out.extend(REQUEST_OPENERS);
    out.extend([
        GREETING_REPLY,
        ON_IT,
        LOOKING,
        WHENEVER_READY,
        UPDATE_REPLY,
        PROPOSAL,
        OTHER_OPTION,
    ]);
    out.extend([RESERVATION, HERE_IT_IS, WELCOME]);
    for t in types {
        out.extend(request_clauses(t));
        out.push(question(t));
        out.extend(answers(t));
        out.extend(multi(t).iter().map(|(s, _)| *s));
        out.extend(revisions(t));
    }
    out.extend(MULTI_GENERIC.iter().map(|(s, _)| *s));
    for list in [
        HEDGES,
        NO_MORE,
        REJECTIONS,
        ACCEPTANCES,
        ADDRESS_QUESTIONS,
        PHONE_QUESTIONS,
        THANKS,
    ] {
        out.extend(list);
    }
    out
}
