#!/usr/bin/env python3
"""Generate the shipped benchmark data: 12 case scripts + 12 patient profiles.

Each case pairs a deterministic world-model script (data/scripts/) with a
simulated-patient profile (data/cases/).  Topic strength tiers control how
discriminative each follow-up is:

  strong  - sharply separates the true condition; low expected entropy, so
            entropy-minimizing selection grabs it as soon as it enters the pool
  medium  - clearly separating, placed just outside the first question pool
  mild    - gently favors the truth; keeps every turn informative
  slow    - very gentle variant used by the six-turn showcase case so no
            early-stop threshold fires
  neutral - carries no signal at all

For non-neutral topics the profile always answers the truth-favoring option,
so the per-turn entropy of the engine's re-elicited distribution can only fall
or stay flat.  Run from the repo root:  python3 tools/gen_benchmark_data.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from patience import kb as kb_mod  # noqa: E402

# (gt_row, other_row) over the two response options; index 0 favors the truth.
STRENGTH_ROWS = {
    "strong": ((0.96, 0.08), (0.08, 0.32)),
    "medium": ((0.85, 0.12), (0.10, 0.42)),
    "mild": ((0.42, 0.30), (0.36, 0.34)),
    "slow": ((0.45, 0.35), (0.40, 0.38)),
    "neutral": ((0.30, 0.30), (0.30, 0.30)),
}

RATIONALES = {
    "strong": "directly separates the leading condition from the rest",
    "medium": "clearly separates the leading condition when positive",
    "mild": "gently shifts weight toward the leading condition",
    "slow": "adds a small amount of evidence for the leading condition",
    "neutral": "background detail; does not separate the candidates",
}


def topic(name, strength, question, responses, answer_index=0, humanized=""):
    return {
        "topic": name,
        "strength": strength,
        "question": question,
        "responses": responses,
        "answer_index": answer_index,
        "humanized": humanized,
    }


CASES = [
    {
        "case_id": "rhinitis_pollen",
        "specialty": "otolaryngology",
        "ground_truth": "allergic_rhinitis",
        "opening": "My nose runs and I sneeze a lot, and my eyes itch.",
        "symptom_summary": "runny nose; sneezing fits; itchy watery eyes",
        "base_weights": {
            "allergic_rhinitis": 0.28,
            "acute_sinusitis": 0.22,
            "vasomotor_rhinitis": 0.20,
            "decongestant_overuse": 0.16,
        },
        "other_weight": 0.14,
        "neutral_likelihood": 0.38,
        "age": 29,
        "personality": "cheerful and talkative",
        "intention": "wants to know why this keeps happening every spring",
        "symptoms": ["runny nose", "sneezing fits", "itchy eyes"],
        "topics": [
            topic(
                "season_pattern",
                "slow",
                "Do your symptoms follow a season, such as spring or early summer?",
                ["Yes, every spring it starts again", "No, it happens all year round"],
            ),
            topic(
                "eye_itching",
                "slow",
                "Do your eyes itch and water along with the nose symptoms?",
                ["Yes, my eyes itch and water a lot", "No, my eyes are fine"],
                humanized="Along with your nose, do your eyes get itchy and watery?",
            ),
            topic(
                "outdoor_trigger",
                "slow",
                "Are the symptoms worse outdoors, around grass or pollen?",
                ["Yes, being outside makes it much worse", "No, outdoors makes no difference"],
            ),
            topic(
                "antihistamine_relief",
                "slow",
                "Have antihistamine tablets helped when you tried them?",
                ["Yes, they help quite a bit", "I have never tried them"],
            ),
            topic(
                "discharge_color",
                "slow",
                "Is the discharge from your nose clear and watery, or thick and colored?",
                ["Clear and watery", "Thick and yellowish"],
                humanized="Is what comes out of your nose clear like water, or thick and colored?",
            ),
            topic(
                "facial_pain",
                "slow",
                "Do you get pain or pressure in your face, around the cheeks or forehead?",
                ["No, no facial pain at all", "Yes, my face feels heavy"],
            ),
            topic(
                "spray_use",
                "slow",
                "Do you use a decongestant nasal spray most days?",
                ["No, I do not use any sprays", "Yes, I use one daily"],
            ),
        ],
    },
    {
        "case_id": "sinusitis_pressure",
        "specialty": "otolaryngology",
        "ground_truth": "acute_sinusitis",
        "opening": "My nose is blocked and my face feels full of pressure.",
        "symptom_summary": "blocked stuffy nose; facial pressure after a cold",
        "base_weights": {
            "acute_sinusitis": 0.30,
            "allergic_rhinitis": 0.22,
            "vasomotor_rhinitis": 0.18,
            "decongestant_overuse": 0.14,
        },
        "other_weight": 0.16,
        "age": 41,
        "personality": "matter-of-fact and brief",
        "intention": "wants relief from the pressure before a work trip",
        "symptoms": ["blocked nose", "facial pressure", "recent cold"],
        "topics": [
            topic(
                "duration",
                "mild",
                "How long have the blocked nose and pressure been going on?",
                ["About a week, since my cold", "Many months on and off"],
            ),
            topic(
                "season_link",
                "neutral",
                "Have you noticed any link to a season or time of year?",
                ["Not really", "Maybe a little"],
                answer_index=0,
            ),
            topic(
                "sleep_quality",
                "neutral",
                "How are you sleeping through the night?",
                ["Poorly, I keep waking", "Fine once I fall asleep"],
                answer_index=1,
            ),
            topic(
                "smell_change",
                "mild",
                "Has your sense of smell changed recently?",
                ["Yes, smells are dulled", "No change in smell"],
            ),
            topic(
                "bend_forward",
                "strong",
                "Does the facial pressure get worse when you bend forward?",
                ["Yes, bending forward makes it throb", "No, bending makes no difference"],
                humanized="When you lean your head forward, does the pressure in your face get worse?",
            ),
            topic(
                "preceding_cold",
                "medium",
                "Did this start right after a cold or flu-like illness?",
                ["Yes, it followed a cold", "No, it came out of nowhere"],
            ),
            topic(
                "coffee_intake",
                "neutral",
                "Do you drink much coffee or tea?",
                ["A few cups a day", "Hardly any"],
                answer_index=0,
            ),
            topic(
                "eye_itch",
                "mild",
                "Do your eyes itch or water?",
                ["No, my eyes are fine", "Yes, they itch"],
            ),
        ],
    },
    {
        "case_id": "vasomotor_temp",
        "specialty": "otolaryngology",
        "ground_truth": "vasomotor_rhinitis",
        "opening": "My nose runs whenever I go out in the cold air.",
        "symptom_summary": "runny nose set off by cold air and strong smells",
        "base_weights": {
            "vasomotor_rhinitis": 0.30,
            "allergic_rhinitis": 0.23,
            "acute_sinusitis": 0.17,
            "decongestant_overuse": 0.14,
        },
        "other_weight": 0.16,
        "age": 52,
        "personality": "patient and precise",
        "intention": "wants to know whether this is an allergy",
        "symptoms": ["runny nose in cold air", "no itching"],
        "topics": [
            topic(
                "itch_presence",
                "mild",
                "Does your nose or do your eyes itch during these episodes?",
                ["No itching at all", "Yes, lots of itching"],
            ),
            topic(
                "work_stress",
                "neutral",
                "Has work or home been unusually stressful lately?",
                ["About the same as always", "Quite stressful"],
                answer_index=0,
            ),
            topic(
                "pollen_testing",
                "mild",
                "Have you ever had allergy testing done?",
                ["Yes, it came back negative", "No, never tested"],
            ),
            topic(
                "pet_exposure",
                "neutral",
                "Do you spend time around cats, dogs, or other animals?",
                ["No pets at home", "Yes, we have a dog"],
                answer_index=0,
            ),
            topic(
                "temp_trigger",
                "strong",
                "Do temperature changes, like stepping into cold air, reliably set off the runny nose?",
                ["Yes, cold air sets it off every time", "No, temperature makes no difference"],
                humanized="Does your nose start running the moment you step into cold air?",
            ),
            topic(
                "odor_trigger",
                "medium",
                "Do strong smells like perfume or smoke set it off?",
                ["Yes, perfume and smoke trigger it", "No, smells are fine"],
            ),
            topic(
                "exercise_habit",
                "neutral",
                "How often do you exercise?",
                ["A few walks a week", "Most days"],
                answer_index=0,
            ),
            topic(
                "spray_history",
                "mild",
                "Do you use decongestant nasal sprays regularly?",
                ["No sprays at all", "Yes, daily for months"],
            ),
        ],
    },
    {
        "case_id": "spray_rebound",
        "specialty": "otolaryngology",
        "ground_truth": "decongestant_overuse",
        "opening": "My nose is always stuffy and spray helps only for a while.",
        "symptom_summary": "constant stuffy blocked nose; relies on decongestant spray",
        "base_weights": {
            "decongestant_overuse": 0.30,
            "vasomotor_rhinitis": 0.22,
            "allergic_rhinitis": 0.18,
            "acute_sinusitis": 0.14,
        },
        "other_weight": 0.16,
        "age": 35,
        "personality": "a little embarrassed, cooperative",
        "intention": "wants to stop needing the spray",
        "symptoms": ["constant blocked nose", "spray dependence"],
        "topics": [
            topic(
                "blockage_pattern",
                "mild",
                "Is the blockage there every day, or does it come and go?",
                ["Every day without fail", "It comes and goes"],
            ),
            topic(
                "morning_state",
                "neutral",
                "How is your nose first thing in the morning?",
                ["Completely blocked", "A bit better"],
                answer_index=0,
            ),
            topic(
                "itch_eyes",
                "mild",
                "Do your eyes itch or water with it?",
                ["No, never", "Yes, often"],
            ),
            topic(
                "diet_change",
                "neutral",
                "Any recent changes to your diet?",
                ["No, I eat the same as always", "I started a new diet"],
                answer_index=0,
            ),
            topic(
                "spray_duration",
                "strong",
                "How long have you been using the decongestant spray daily?",
                ["Months, maybe a year", "Just a couple of days"],
                humanized="Roughly how long have you used the nose spray every day, weeks or just days?",
            ),
            topic(
                "rebound_timing",
                "medium",
                "Does the blockage come back worse as each dose of spray wears off?",
                ["Yes, worse every time it wears off", "No, it stays the same"],
            ),
            topic(
                "fever_presence",
                "neutral",
                "Have you had any fever?",
                ["No fever", "A slight temperature once"],
                answer_index=0,
            ),
            topic(
                "facial_pressure",
                "mild",
                "Any pain or pressure in your face?",
                ["No pressure at all", "Yes, around the cheeks"],
            ),
        ],
    },
    {
        "case_id": "dizzy_postural",
        "specialty": "neurology",
        "ground_truth": "orthostatic_hypotension",
        "opening": "I feel dizzy when I stand up, like I might faint.",
        "symptom_summary": "dizziness on standing; light-headed near-fainting",
        "base_weights": {
            "orthostatic_hypotension": 0.22,
            "cervical_spondylosis": 0.19,
            "vertigo": 0.17,
        },
        "other_weight": 0.42,
        "age": 58,
        "personality": "worried but cooperative",
        "intention": "wants to know if the new blood pressure tablet is to blame",
        "symptoms": ["dizzy on standing", "nearly fainted twice"],
        "topics": [
            {
                "topic": "dizziness_character",
                "strength": "special",
                "question": (
                    "Can you describe the dizziness itself: does the room spin, "
                    "do you feel light-headed, or do you lose your balance?"
                ),
                "responses": [
                    "The room spins",
                    "I feel light-headed",
                    "I lose balance but nothing spins",
                ],
                "rows": {
                    "orthostatic_hypotension": [0.1, 0.4, 0.2],
                    "cervical_spondylosis": [0.15, 0.2, 0.45],
                    "vertigo": [0.7, 0.1, 0.15],
                },
                "answer_index": 1,
                "humanized": "",
                "rationale": "the character of the dizziness separates all three conditions",
            },
            topic(
                "hearing_change",
                "neutral",
                "Have you noticed any change in your hearing or ringing in your ears?",
                ["No change in my hearing", "Yes, some ringing"],
                answer_index=0,
            ),
            topic(
                "episode_duration",
                "mild",
                "How long does each dizzy spell last?",
                ["Only a few seconds", "Several minutes or more"],
            ),
            topic(
                "nausea_presence",
                "neutral",
                "Do you feel sick to your stomach during the spells?",
                ["No, no nausea", "Yes, quite queasy"],
                answer_index=0,
            ),
            topic(
                "vision_dimming",
                "strong",
                "Does your vision dim or gray out just before the dizziness?",
                ["Yes, things go dark for a moment", "No, my vision stays normal"],
                humanized="Right before you feel dizzy, does everything briefly go dark or gray?",
            ),
            topic(
                "standing_trigger",
                "medium",
                "Does the dizziness come on within seconds of standing up?",
                ["Yes, right after I stand up", "No, it is not tied to standing"],
            ),
            topic(
                "neck_grinding",
                "mild",
                "Does your neck grind or ache when you turn your head?",
                ["No, my neck feels fine", "Yes, it grinds a lot"],
            ),
        ],
    },
    {
        "case_id": "dizzy_spinning",
        "specialty": "neurology",
        "ground_truth": "vertigo",
        "opening": "The room spins when I roll over in bed.",
        "symptom_summary": "spinning dizziness; room spins when turning in bed",
        "base_weights": {
            "vertigo": 0.30,
            "orthostatic_hypotension": 0.24,
            "cervical_spondylosis": 0.20,
        },
        "other_weight": 0.26,
        "age": 47,
        "personality": "precise, keeps a symptom diary",
        "intention": "wants the spinning to stop before a flight",
        "symptoms": ["room spins in bed", "nausea with attacks"],
        "topics": [
            topic(
                "attack_length",
                "mild",
                "How long does each spinning attack last?",
                ["Under a minute", "Hours at a time"],
            ),
            topic(
                "caffeine_use",
                "neutral",
                "How much coffee or tea do you drink?",
                ["Two cups a day", "None at all"],
                answer_index=0,
            ),
            topic(
                "spin_direction",
                "mild",
                "Does the world itself seem to move, or is it more a feeling inside your head?",
                ["The whole room truly spins", "It is more a vague wooziness"],
            ),
            topic(
                "medication_list",
                "neutral",
                "Are you taking any regular medications?",
                ["Only a vitamin", "A few blood pressure pills"],
                answer_index=0,
            ),
            topic(
                "position_trigger",
                "strong",
                "Is the spinning set off by rolling over in bed or tipping your head back?",
                ["Yes, rolling over sets it off instantly", "No, position makes no difference"],
                humanized="Does turning over in bed or tilting your head back start the spinning?",
            ),
            topic(
                "nausea_with_spin",
                "medium",
                "Do you get nauseous or vomit during the spinning?",
                ["Yes, I feel very sick with it", "No, no nausea at all"],
            ),
            topic(
                "standing_faint",
                "mild",
                "Do you feel faint when you stand up quickly?",
                ["No, standing up is fine", "Yes, sometimes"],
            ),
            topic(
                "work_screen",
                "neutral",
                "Do you spend long hours at a screen?",
                ["Yes, most of the day", "Not really"],
                answer_index=0,
            ),
        ],
    },
    {
        "case_id": "neck_dizzy",
        "specialty": "neurology",
        "ground_truth": "cervical_spondylosis",
        "opening": "My neck hurts and turning my head makes me unsteady.",
        "symptom_summary": "chronic neck pain; unsteady when turning the head",
        "base_weights": {
            "cervical_spondylosis": 0.30,
            "orthostatic_hypotension": 0.23,
            "vertigo": 0.21,
        },
        "other_weight": 0.26,
        "age": 63,
        "personality": "stoic, understates symptoms",
        "intention": "wants to keep driving safely",
        "symptoms": ["neck pain", "unsteadiness on turning the head"],
        "topics": [
            topic(
                "pain_duration",
                "mild",
                "How long has your neck been painful?",
                ["Years, slowly getting worse", "Just since last week"],
            ),
            topic(
                "sleep_position",
                "neutral",
                "Do you sleep with a thick pillow?",
                ["Yes, quite a thick one", "No, a flat one"],
                answer_index=0,
            ),
            topic(
                "arm_tingling",
                "mild",
                "Do you get tingling or numbness down your arms?",
                ["Yes, into my right arm", "No, arms feel normal"],
            ),
            topic(
                "morning_stiffness",
                "neutral",
                "Is the neck stiffer in the morning?",
                ["A bit stiffer", "About the same all day"],
                answer_index=0,
            ),
            topic(
                "head_turn_trigger",
                "strong",
                "Does turning or tilting your head bring on the unsteadiness?",
                ["Yes, turning my head sets it off", "No, head movement changes nothing"],
                humanized="When you turn your head, do you suddenly feel unsteady?",
            ),
            topic(
                "neck_grinding",
                "medium",
                "Do you hear or feel grinding when you move your neck?",
                ["Yes, it grinds and crackles", "No grinding at all"],
            ),
            topic(
                "true_spinning",
                "mild",
                "During the unsteadiness, does the room actually spin?",
                ["No, it never truly spins", "Yes, it whirls around"],
            ),
            topic(
                "appetite",
                "neutral",
                "How is your appetite?",
                ["Normal", "A little reduced"],
                answer_index=0,
            ),
        ],
    },
    {
        "case_id": "dizzy_morning",
        "specialty": "neurology",
        "ground_truth": "orthostatic_hypotension",
        "opening": "I feel faint and dizzy every morning after I take my pills.",
        "symptom_summary": "faint dizzy spells each morning after blood pressure pills",
        "base_weights": {
            "orthostatic_hypotension": 0.30,
            "vertigo": 0.23,
            "cervical_spondylosis": 0.21,
        },
        "other_weight": 0.26,
        "age": 71,
        "personality": "chatty, drifts off topic",
        "intention": "wants to know whether to stop the new tablet",
        "symptoms": ["faintness after morning pills", "dizzy on getting up"],
        "topics": [
            topic(
                "pill_list",
                "mild",
                "Which tablets do you take in the morning?",
                ["A new blood pressure tablet", "Just a multivitamin"],
            ),
            topic(
                "breakfast_habit",
                "neutral",
                "Do you eat breakfast before or after the tablets?",
                ["After", "Before"],
                answer_index=0,
            ),
            topic(
                "fluid_intake",
                "mild",
                "How much water do you drink through the day?",
                ["Not much, a glass or two", "Plenty, two liters or so"],
            ),
            topic(
                "garden_work",
                "neutral",
                "Do you still manage the garden?",
                ["Yes, most days", "Not anymore"],
                answer_index=0,
            ),
            topic(
                "rise_trigger",
                "strong",
                "Does the faintness hit right as you get up from bed or a chair?",
                ["Yes, the moment I get up", "No, it comes at random times"],
                humanized="Does the faint feeling strike just as you stand up from bed or a chair?",
            ),
            topic(
                "sit_relief",
                "medium",
                "Does sitting back down make the faint feeling pass?",
                ["Yes, sitting settles it quickly", "No, sitting does not help"],
            ),
            topic(
                "room_spin",
                "mild",
                "Does the room spin during these spells?",
                ["No, it is more a fading feeling", "Yes, it spins violently"],
            ),
            topic(
                "hearing_ring",
                "neutral",
                "Any ringing in your ears?",
                ["No ringing", "Occasionally"],
                answer_index=0,
            ),
        ],
    },
    {
        "case_id": "burning_chest",
        "specialty": "gastroenterology",
        "ground_truth": "gerd",
        "opening": "I get a burning feeling in my chest after big meals.",
        "symptom_summary": "burning chest after meals; worse lying down",
        "base_weights": {"gerd": 0.36, "gastritis": 0.26, "lactose_intolerance": 0.14},
        "other_weight": 0.24,
        "age": 45,
        "personality": "jovial, fond of late dinners",
        "intention": "wants to avoid an endoscopy if possible",
        "symptoms": ["burning behind the breastbone", "sour taste"],
        "topics": [
            topic(
                "meal_size_link",
                "mild",
                "Is it worse after large meals?",
                ["Yes, big dinners set it off", "Meal size makes no difference"],
            ),
            topic(
                "alcohol_use",
                "neutral",
                "How often do you drink alcohol?",
                ["A glass of wine with dinner", "Rarely"],
                answer_index=0,
            ),
            topic(
                "painkiller_use",
                "mild",
                "Do you take aspirin or ibuprofen regularly?",
                ["No, almost never", "Yes, most days for my knees"],
            ),
            topic(
                "smoking",
                "neutral",
                "Do you smoke?",
                ["No, never", "I quit years ago"],
                answer_index=0,
            ),
            topic(
                "lying_worse",
                "strong",
                "Does lying down or bending over bring the burning up toward your throat?",
                ["Yes, lying down brings it right up", "No, position changes nothing"],
                humanized="When you lie down or bend over, does the burning rise up toward your throat?",
            ),
            topic(
                "sour_taste",
                "medium",
                "Do you get a sour or acid taste in your mouth with it?",
                ["Yes, a sour taste comes up", "No taste at all"],
            ),
            topic(
                "night_wake",
                "mild",
                "Does it ever wake you at night?",
                ["Yes, some nights", "Never at night"],
            ),
            topic(
                "weight_change",
                "neutral",
                "Has your weight changed recently?",
                ["Steady", "Up a little"],
                answer_index=0,
            ),
        ],
    },
    {
        "case_id": "milk_bloating",
        "specialty": "gastroenterology",
        "ground_truth": "lactose_intolerance",
        "opening": "My belly gets bloated and crampy after milk or cheese.",
        "symptom_summary": "bloated gassy belly with cramps after dairy",
        "base_weights": {"lactose_intolerance": 0.40, "gastritis": 0.32},
        "other_weight": 0.28,
        "age": 26,
        "personality": "health-conscious student",
        "intention": "wants to know if dairy has to go entirely",
        "symptoms": ["bloating after dairy", "cramps and gas"],
        "topics": [
            topic(
                "stool_change",
                "mild",
                "Are your stools looser on the bad days?",
                ["Yes, much looser", "No, unchanged"],
            ),
            topic(
                "study_stress",
                "neutral",
                "Is it worse around exams or stressful weeks?",
                ["Not really linked to stress", "Maybe slightly"],
                answer_index=0,
            ),
            topic(
                "burning_pain",
                "mild",
                "Do you get a burning pain high in your stomach?",
                ["No burning at all", "Yes, a gnawing burn"],
            ),
            topic(
                "morning_coffee",
                "neutral",
                "Do you drink coffee?",
                ["One latte most mornings", "No coffee"],
                answer_index=0,
            ),
            topic(
                "dairy_timing",
                "strong",
                "Do the bloating and cramps arrive within a few hours of milk, cheese, or ice cream?",
                ["Yes, within two hours of dairy every time", "No, dairy makes no difference"],
                humanized="After milk, cheese, or ice cream, does the bloating start within a couple of hours?",
            ),
            topic(
                "dairy_free_trial",
                "medium",
                "Have you tried a dairy-free week, and did it help?",
                ["Yes, a dairy-free week fixed it", "Never tried cutting dairy"],
            ),
            topic(
                "nausea_presence",
                "mild",
                "Do you feel nauseous with the bloating?",
                ["Rarely", "Often"],
            ),
            topic(
                "sleep_pattern",
                "neutral",
                "How is your sleep?",
                ["Fine", "A bit short"],
                answer_index=0,
            ),
        ],
    },
    {
        "case_id": "stomach_gnaw",
        "specialty": "gastroenterology",
        "ground_truth": "gastritis",
        "opening": "A gnawing burning pain sits in my upper belly, worse with coffee.",
        "symptom_summary": "gnawing burning high in the belly; worse with coffee and painkillers",
        "base_weights": {"gastritis": 0.36, "gerd": 0.26, "lactose_intolerance": 0.16},
        "other_weight": 0.22,
        "age": 50,
        "personality": "tired shift worker",
        "intention": "wants to know if it is an ulcer",
        "symptoms": ["gnawing upper belly pain", "worse with coffee"],
        "topics": [
            topic(
                "meal_relation",
                "mild",
                "Does eating change the pain?",
                ["Eating dulls it for a while", "Food makes no difference"],
            ),
            topic(
                "shift_pattern",
                "neutral",
                "Do you work nights at the moment?",
                ["Yes, night shifts", "Days this month"],
                answer_index=0,
            ),
            topic(
                "dairy_link",
                "mild",
                "Does milk or cheese set it off?",
                ["No, dairy is fine", "Yes, dairy bloats me"],
            ),
            topic(
                "water_intake",
                "neutral",
                "How much water do you drink on shift?",
                ["Not enough, probably", "Plenty"],
                answer_index=0,
            ),
            topic(
                "painkiller_habit",
                "strong",
                "Do you take ibuprofen or similar painkillers most days?",
                ["Yes, ibuprofen nearly every day", "No, I avoid painkillers"],
                humanized="Are you taking ibuprofen or a similar painkiller on most days?",
            ),
            topic(
                "nausea_morning",
                "medium",
                "Do you feel queasy or nauseous, especially before eating?",
                ["Yes, queasy before meals", "No nausea"],
            ),
            topic(
                "throat_acid",
                "mild",
                "Does acid ever rise into your throat when lying flat?",
                ["Not really", "Yes, often at night"],
            ),
            topic(
                "exercise_link",
                "neutral",
                "Does exercise change anything?",
                ["No effect", "A little better after walks"],
                answer_index=0,
            ),
        ],
    },
    {
        "case_id": "reflux_night",
        "specialty": "gastroenterology",
        "ground_truth": "gerd",
        "opening": "A sour taste wakes me at night and my chest burns when I lie down.",
        "symptom_summary": "night-time sour taste; chest burning when lying flat",
        "base_weights": {"gerd": 0.40, "gastritis": 0.30},
        "other_weight": 0.30,
        "age": 57,
        "personality": "precise early riser",
        "intention": "wants to sleep through the night again",
        "symptoms": ["sour taste at night", "burning chest lying down"],
        "topics": [
            topic(
                "dinner_timing",
                "mild",
                "How soon before bed do you eat dinner?",
                ["Within an hour of bed", "Three hours or more before"],
            ),
            topic(
                "tea_habit",
                "neutral",
                "Do you drink tea in the evening?",
                ["A cup after dinner", "No evening tea"],
                answer_index=0,
            ),
            topic(
                "antacid_relief",
                "mild",
                "Do antacid tablets settle it?",
                ["Yes, within minutes", "I have not tried them"],
            ),
            topic(
                "snoring",
                "neutral",
                "Do you snore?",
                ["So I am told", "No"],
                answer_index=0,
            ),
            topic(
                "pillow_stack",
                "strong",
                "Does propping yourself up on extra pillows stop the night burning?",
                ["Yes, extra pillows keep it down", "No, pillows change nothing"],
                humanized="If you sleep propped up on extra pillows, does the night-time burning stay away?",
            ),
            topic(
                "regurgitation",
                "medium",
                "Does food or sour liquid ever come back up into your mouth?",
                ["Yes, sour liquid comes up", "Never"],
            ),
            topic(
                "appetite_change",
                "mild",
                "Is your appetite normal?",
                ["Yes, normal", "Smaller than before"],
            ),
            topic(
                "morning_voice",
                "neutral",
                "Is your voice hoarse in the morning?",
                ["Sometimes", "No"],
                answer_index=0,
            ),
        ],
    },
]


def arrange(topics: list[dict]) -> list[dict]:
    """Fix pool composition: gentle topics fill the first question window,
    the sharp separators sit just past it.

    The engine re-derives its candidate pool each turn from the leading
    un-asked questions, so entropy-minimizing selection reaches the sharp
    topics one ask later while uninformed policies must spend picks to shift
    the window at all.  Slow-burn cases (no sharp topic) keep author order.
    """
    by_strength: dict[str, list[dict]] = {}
    for t in topics:
        by_strength.setdefault(t["strength"], []).append(t)
    if not by_strength.get("strong") and not by_strength.get("medium"):
        return topics
    if by_strength.get("special"):
        # a case whose residual mass dominates the prior must meet its sharp
        # questions early, or gentle evidence flattens the distribution first
        return topics
    milds = list(by_strength.get("mild", []))
    neutrals = list(by_strength.get("neutral", []))
    out = list(by_strength.get("special", []))
    while len(out) < 5 and (milds or neutrals):
        if milds:
            out.append(milds.pop(0))
        if len(out) < 5 and neutrals:
            out.append(neutrals.pop(0))
    out.extend(by_strength.get("strong", []))
    out.extend(by_strength.get("medium", []))
    out.extend(neutrals)
    out.extend(milds)
    return out


def build_script(case: dict, candidates: list[str]) -> dict:
    gt = case["ground_truth"]
    questions = []
    responses = {}
    likelihoods = {}
    for t in arrange(case["topics"]):
        questions.append(
            {
                "topic": t["topic"],
                "text": t["question"],
                "rationale": t.get("rationale") or RATIONALES[t["strength"]],
                "humanized": t.get("humanized", ""),
            }
        )
        responses[t["topic"]] = list(t["responses"])
        if t["strength"] == "special":
            likelihoods[t["topic"]] = {d: list(row) for d, row in t["rows"].items()}
            continue
        if t["strength"] == "neutral":
            continue  # no table: neutral rows are the documented default
        gt_row, other_row = STRENGTH_ROWS[t["strength"]]
        table = {}
        for d in candidates:
            table[d] = list(gt_row if d == gt else other_row)
        likelihoods[t["topic"]] = table
    return {
        "case_id": case["case_id"],
        "opening": case["opening"],
        "symptom_summary": case["symptom_summary"],
        "base_weights": case["base_weights"],
        "other_weight": case["other_weight"],
        "neutral_likelihood": case.get("neutral_likelihood", 0.3),
        "questions": questions,
        "responses": responses,
        "likelihoods": likelihoods,
    }


def build_profile(case: dict) -> dict:
    facts = {}
    for t in case["topics"]:
        facts[t["topic"]] = t["responses"][t["answer_index"]]
    return {
        "case_id": case["case_id"],
        "specialty": case["specialty"],
        "ground_truth": case["ground_truth"],
        "opening_statement": case["opening"],
        "symptoms": case["symptoms"],
        "age": case["age"],
        "personality": case["personality"],
        "intention": case["intention"],
        "facts": facts,
    }


def candidates_for(kb, summary: str) -> list[str]:
    ranked = kb_mod.map_to_symptoms(kb, summary, top_n=3)
    if not ranked:
        raise SystemExit(f"summary maps to no symptoms: {summary!r}")
    _, _, candidates = kb_mod.gather_context(kb, [e for e, _ in ranked])
    return candidates


def check_case(case: dict, candidates: list[str]) -> None:
    gt = case["ground_truth"]
    if gt not in candidates:
        raise SystemExit(f"{case['case_id']}: truth {gt} not among candidates {candidates}")
    weights = case["base_weights"]
    if set(weights) != set(candidates):
        raise SystemExit(
            f"{case['case_id']}: base weights {sorted(weights)} != candidates {sorted(candidates)}"
        )
    if max(weights, key=weights.get) != gt:
        raise SystemExit(f"{case['case_id']}: truth does not lead the base weights")
    total = sum(weights.values()) + case["other_weight"]
    if abs(total - 1.0) > 1e-9:
        raise SystemExit(f"{case['case_id']}: base weights sum to {total}")
    strengths = [t["strength"] for t in case["topics"]]
    if all(s == "neutral" for s in strengths):
        raise SystemExit(f"{case['case_id']}: no discriminative topic")
    for t in case["topics"]:
        if t["strength"] in ("strong", "medium", "mild", "slow") and t["answer_index"] != 0:
            raise SystemExit(
                f"{case['case_id']}:{t['topic']}: informative answer must favor the truth"
            )
        if len(t["responses"]) != len(set(t["responses"])):
            raise SystemExit(f"{case['case_id']}:{t['topic']}: duplicate responses")


def main() -> None:
    kb = kb_mod.ingest(ROOT / "data" / "sample_kb.jsonl")
    scripts_dir = ROOT / "data" / "scripts"
    cases_dir = ROOT / "data" / "cases"
    scripts_dir.mkdir(parents=True, exist_ok=True)
    cases_dir.mkdir(parents=True, exist_ok=True)
    openings = set()
    for case in CASES:
        if case["opening"] in openings:
            raise SystemExit(f"duplicate opening: {case['opening']!r}")
        openings.add(case["opening"])
        candidates = candidates_for(kb, case["symptom_summary"])
        check_case(case, candidates)
        script = build_script(case, candidates)
        profile = build_profile(case)
        script_path = scripts_dir / f"{case['case_id']}.json"
        case_path = cases_dir / f"{case['case_id']}.json"
        script_path.write_text(
            json.dumps(script, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        case_path.write_text(
            json.dumps(profile, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"{case['case_id']}: candidates={candidates}")
    print(f"wrote {len(CASES)} scripts to {scripts_dir} and profiles to {cases_dir}")


if __name__ == "__main__":
    main()
