//! The built-in questionnaire battery.
//!
//! Item wordings are reproduced exactly as published for each scale. The
//! Social Attractiveness items after the first are elliptical ("...trustworthy?")
//! and are expanded with the construct stem when shown to a model.

use super::{Construct, ConstructCategory, Instrument, Item, ItemKind, LikertScale, ScaleAnchors};

const SEVEN: LikertScale = LikertScale { min: 1, max: 7 };
const FIVE: LikertScale = LikertScale { min: 1, max: 5 };

/// Construct ids of the six central constructs in reporting order.
pub const CENTRAL_CONSTRUCTS: [&str; 6] = [
    "attitude",
    "intention",
    "subjective_norms",
    "behavioral_control",
    "social_attractiveness",
    "social_closeness",
];

/// The eight multi-item scales in reliability-table order.
pub const MULTI_ITEM_CONSTRUCTS: [&str; 8] = [
    "attitude",
    "intention",
    "subjective_norms",
    "behavioral_control",
    "social_attractiveness",
    "social_closeness",
    "threat_to_freedom",
    "meat_attachment",
];

/// MAQ items keyed away from meat attachment.
pub const MAQ_REVERSE_ITEMS: [&str; 6] = [
    "I feel bad when I think of eating meat.",
    "To eat meat is disrespectful towards life and the environment.",
    "By eating meat I'm reminded of the death and suffering of animals.",
    "Meat sickens me.",
    "I would feel fine with a meatless diet.",
    "Meat reminds me of diseases.",
];

const MAQ_ITEMS: [&str; 20] = [
    "To eat meat is one of the good pleasures in life.",
    "Meat is irreplaceable in my diet.",
    "According to our position in the food chain, we have the right to eat meat.",
    "I feel bad when I think of eating meat.",
    "I love meals with meat.",
    "To eat meat is disrespectful towards life and the environment.",
    "To eat meat is an unquestionable right of every person.",
    "Meat consumption is crucial to my balance.",
    "A full meal is a meal with meat.",
    "I'm a big fan of meat.",
    "If I couldn't eat meat I would feel weak.",
    "If I was forced to stop eating meat I would feel sad.",
    "By eating meat I'm reminded of the death and suffering of animals.",
    "Eating meat is a natural and undisputable practice.",
    "I don't picture myself without eating meat regularly.",
    "Meat sickens me.",
    "I would feel fine with a meatless diet.",
    "Meat consumption is a natural act of one's affirmation as a human being.",
    "A good steak is without comparison.",
    "Meat reminds me of diseases.",
];

fn likert(id: &str, text: &str, scale: LikertScale) -> Item {
    Item {
        id: id.to_owned(),
        text: text.to_owned(),
        reverse_coded: false,
        scale,
        kind: ItemKind::Likert,
    }
}

fn differential(id: &str, positive: &str, negative: &str) -> Item {
    Item {
        id: id.to_owned(),
        text: format!("{positive} -- {negative}"),
        reverse_coded: false,
        scale: SEVEN,
        kind: ItemKind::SemanticDifferential {
            positive_pole: positive.to_owned(),
            negative_pole: negative.to_owned(),
        },
    }
}

fn anchors(low: &str, high: &str) -> Option<ScaleAnchors> {
    Some(ScaleAnchors {
        low: low.to_owned(),
        high: high.to_owned(),
    })
}

#[allow(clippy::too_many_arguments)]
fn construct(
    id: &str,
    name: &str,
    category: ConstructCategory,
    source_study: Option<&str>,
    baseline_study: Option<&str>,
    human_alpha: Option<f64>,
    scale: LikertScale,
    prompt: &str,
    anchors: Option<ScaleAnchors>,
    stem: Option<&str>,
    items: Vec<Item>,
) -> Construct {
    Construct {
        id: id.to_owned(),
        name: name.to_owned(),
        category,
        source_study: source_study.map(str::to_owned),
        baseline_study: baseline_study.map(str::to_owned),
        human_alpha,
        scale,
        prompt: prompt.to_owned(),
        anchors,
        stem: stem.map(str::to_owned),
        items,
    }
}

/// Builds the full 53-item battery.
///
/// ```
/// let instrument = dialogsim::instrument::builtin_instrument();
/// assert_eq!(instrument.item_count(), 53);
/// let intention = instrument.construct("intention").unwrap();
/// assert_eq!(intention.items[0].text, "I intend to eat less white meat.");
/// ```
pub fn builtin_instrument() -> Instrument {
    use ConstructCategory::*;

    let agree7 = || anchors("strongly disagree", "strongly agree");
    let much7 = || anchors("not at all", "very much");

    let maq_items = MAQ_ITEMS
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let mut item = likert(&format!("maq_{:02}", i + 1), text, FIVE);
            item.reverse_coded = MAQ_REVERSE_ITEMS.contains(text);
            item
        })
        .collect();

    let constructs = vec![
        construct(
            "persuasiveness",
            "Persuasiveness",
            SingleItem,
            None,
            None,
            None,
            SEVEN,
            "Rate the arguments the other person has made so far.",
            anchors("not at all persuasive", "extremely persuasive"),
            None,
            vec![likert(
                "persuasiveness",
                "How persuasive did you find this argument?",
                SEVEN,
            )],
        ),
        construct(
            "behavioral_change",
            "Behavioral Change",
            SingleItem,
            None,
            None,
            None,
            SEVEN,
            "Rate the arguments the other person has made so far.",
            anchors("not at all", "very much"),
            None,
            vec![likert(
                "behavioral_change",
                "To what extent did this argument make you consider changing your behavior?",
                SEVEN,
            )],
        ),
        construct(
            "attitude",
            "Attitude",
            Tpb,
            Some("Berndsen & van der Pligt 2005"),
            Some("Pabian et al. 2020"),
            Some(0.86),
            SEVEN,
            "For me, reducing my meat consumption would be ...",
            None,
            None,
            vec![
                differential("attitude_pleasant", "Pleasant", "Unpleasant"),
                differential("attitude_useful", "Useful", "Useless"),
                differential("attitude_favorable", "Favorable", "Unfavorable"),
                differential("attitude_good", "Good", "Bad"),
            ],
        ),
        construct(
            "intention",
            "Intention to Reduce Meat",
            Tpb,
            Some("Graça et al. 2015"),
            Some("Pabian et al. 2020"),
            Some(0.85),
            SEVEN,
            "Indicate how much you agree with each statement.",
            agree7(),
            None,
            vec![
                likert("intention_white_meat", "I intend to eat less white meat.", SEVEN),
                likert("intention_red_meat", "I intend to eat less red meat.", SEVEN),
                likert(
                    "intention_processed_meat",
                    "I intend to eat less processed meat.",
                    SEVEN,
                ),
            ],
        ),
        construct(
            "subjective_norms",
            "Subjective Norms",
            Tpb,
            Some("Berndsen & van der Pligt 2005"),
            Some("Wyker & Davison 2010"),
            Some(0.75),
            SEVEN,
            "Answer each question.",
            much7(),
            None,
            vec![
                likert(
                    "norms_friends",
                    "How much do you feel your friends want you to reduce your meat consumption in the next year?",
                    SEVEN,
                ),
                likert(
                    "norms_family",
                    "How much do you feel your family want you to reduce your meat consumption in the next year?",
                    SEVEN,
                ),
                likert(
                    "norms_health_experts",
                    "How much do you feel health experts want you to reduce your meat consumption in the next year?",
                    SEVEN,
                ),
                likert(
                    "norms_colleagues",
                    "How much do you feel your colleagues want you to reduce your meat consumption in the next year?",
                    SEVEN,
                ),
            ],
        ),
        construct(
            "behavioral_control",
            "Behavioral Control",
            Tpb,
            Some("Wyker & Davison 2010"),
            Some("Wyker & Davison 2010"),
            Some(0.70),
            SEVEN,
            "Answer each question.",
            much7(),
            None,
            vec![
                likert(
                    "control_personal",
                    "How much personal control do you feel you have about reducing your meat consumption in the next year?",
                    SEVEN,
                ),
                likert(
                    "control_capable",
                    "To what extent do you see yourself as being capable of reducing your meat consumption in the next year?",
                    SEVEN,
                ),
            ],
        ),
        construct(
            "meat_attachment",
            "Meat Attachment",
            Additional,
            Some("Graça et al. 2015"),
            Some("Graça et al. 2015"),
            Some(0.92),
            FIVE,
            "Indicate how much you agree with each statement.",
            anchors("strongly disagree", "strongly agree"),
            None,
            maq_items,
        ),
        construct(
            "threat_to_freedom",
            "Threat of Freedom",
            Additional,
            Some("Dillard & Shen 2005"),
            Some("Dillard & Shen 2005"),
            Some(0.84),
            SEVEN,
            "Indicate how much you agree with each statement about the other person.",
            agree7(),
            None,
            vec![
                likert(
                    "freedom_decide_for_me",
                    "The person tried to make a decision about my own diet for me.",
                    SEVEN,
                ),
                likert(
                    "freedom_influence",
                    "The person tried to influence me and my diet.",
                    SEVEN,
                ),
                likert(
                    "freedom_threatened",
                    "The person threatened my freedom to decide about my own diet.",
                    SEVEN,
                ),
                likert(
                    "freedom_pressure",
                    "The person tried to pressure me regarding my diet.",
                    SEVEN,
                ),
            ],
        ),
        construct(
            "social_attractiveness",
            "Social Attractiveness",
            SocialCost,
            Some("Thürmer et al. 2022"),
            Some("Thürmer et al. 2022"),
            Some(0.91),
            SEVEN,
            "Answer each question about your interaction partner.",
            much7(),
            Some("To what extent do you think your interaction partner is"),
            vec![
                likert(
                    "attractiveness_intelligent",
                    "To what extent do you think your interaction partner is intelligent?",
                    SEVEN,
                ),
                likert("attractiveness_trustworthy", "...trustworthy?", SEVEN),
                likert("attractiveness_friendly", "...friendly?", SEVEN),
                likert("attractiveness_open", "...open?", SEVEN),
                likert("attractiveness_likeable", "...likeable?", SEVEN),
                likert("attractiveness_respectable", "...respectable?", SEVEN),
                likert("attractiveness_interesting", "...interesting?", SEVEN),
            ],
        ),
        construct(
            "social_closeness",
            "Social Closeness",
            SocialCost,
            Some("Monin et al. 2008"),
            Some("Monin et al. 2008"),
            Some(0.91),
            SEVEN,
            "Indicate how much you agree with each statement about the other person.",
            agree7(),
            None,
            vec![
                likert(
                    "closeness_get_to_know",
                    "I would like to get to know the other person better.",
                    SEVEN,
                ),
                likert(
                    "closeness_lunch",
                    "I would like to have lunch with the other person sometime.",
                    SEVEN,
                ),
                likert(
                    "closeness_work_together",
                    "I would like to work together with the other person on a task.",
                    SEVEN,
                ),
                likert(
                    "closeness_talk_food",
                    "I would like to have a conversation with the other person about food.",
                    SEVEN,
                ),
                likert(
                    "closeness_emotionally_close",
                    "I felt emotionally close to the other person.",
                    SEVEN,
                ),
                likert(
                    "closeness_wanted_conversation",
                    "I wanted to have a conversation with the other person.",
                    SEVEN,
                ),
                likert(
                    "closeness_made_friends",
                    "I felt like I made friends with the other person.",
                    SEVEN,
                ),
            ],
        ),
    ];

    Instrument::new(constructs).expect("built-in instrument is well formed")
}
