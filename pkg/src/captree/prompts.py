"""Versioned prompt templates for every LM-facing step.

Templates are stored verbatim; ``render`` substitutes only the named
placeholders so literal braces (e.g. in JSON examples) survive untouched.
Editing any template requires bumping PROMPT_VERSION, which invalidates the
response cache.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import ConfigurationError

PROMPT_VERSION = "v1"

EMBEDDING_PREFIX = "The model has the following skill or capability: "


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    system: str
    user: str
    max_new_tokens: int
    temperature: float

    def render(self, **values: object) -> tuple[str, str]:
        return _render(self.system, values), _render(self.user, values)


def _render(template: str, values: dict) -> str:
    def repl(match: re.Match) -> str:
        key = match.group(1)
        if key in values:
            return str(values[key])
        return match.group(0)

    return re.sub(r"\{([a-z][a-z_0-9]*)\}", repl, template)


def template_for(registry: dict[str, PromptTemplate], family: str, purpose: str) -> PromptTemplate:
    try:
        return registry[family]
    except KeyError:
        raise ConfigurationError(
            f"no {purpose} prompt template registered for family {family!r}"
        ) from None


_ANNOTATION_REQUIREMENT = """\
## Requirement
- The skill description should be an action-oriented gerund phrase that is **informative** and **detailed**.
- The phrase should refer to a **specific** {focus} that comprehensively covers the key aspects of {covered}, without including any context or specifics from {sources}.
- Avoid unnecessary elements unrelated to the core capability.
- Please output **only a gerund phrase** describing the skill, with NO additional text."""


ANNOTATION_TEMPLATES: dict[str, PromptTemplate] = {
    "math": PromptTemplate(
        name="annotation-math",
        system=(
            "Given a mathematical question and its correct solution, generate a gerund phrase "
            "that thoroughly and precisely describes the **specific** mathematical skill or "
            "capability required to solve the question."
        ),
        user="## Question\n{input}\n\n## Solution\n{output}\n\n"
        + _ANNOTATION_REQUIREMENT.format(
            focus="skill or capability",
            covered="the solution",
            sources="the question or solution",
        ),
        max_new_tokens=1024,
        temperature=0.0,
    ),
    "mmlu": PromptTemplate(
        name="annotation-mmlu",
        system=(
            "Given a multiple-choice question testing a model's wide-ranging knowledge and "
            "reasoning skills, generate a gerund phrase that thoroughly and precisely describes "
            "the **specific** skill or capability required to determine the correct answer."
        ),
        user="## Question\n{input}\n\n## Answer\n{output}\n\n"
        + _ANNOTATION_REQUIREMENT.format(
            focus="skill or capability",
            covered="selecting the correct answer",
            sources="the question or answer",
        ),
        max_new_tokens=1024,
        temperature=0.0,
    ),
    "code": PromptTemplate(
        name="annotation-code",
        system=(
            "Given a code generation problem (involving data science) and its correct Python "
            "implementation, generate a gerund phrase that thoroughly and precisely describes "
            "the coding skill or capability required to solve the problem in detail."
        ),
        user="## Problem\n{input}\n\n## Implementation\n{output}\n\n"
        + _ANNOTATION_REQUIREMENT.format(
            focus="coding skill or capability",
            covered="the implementation",
            sources="the problem or implementation",
        ),
        max_new_tokens=1024,
        temperature=0.0,
    ),
    "instruction": PromptTemplate(
        name="annotation-instruction",
        system=(
            "Given a user instruction and a reference response to the instruction, generate a "
            "gerund phrase that thoroughly and precisely describes the **specific** skill or "
            "capability required to respond to the instruction."
        ),
        user="## Instruction\n{input}\n\n## Response\n{output}\n\n"
        + _ANNOTATION_REQUIREMENT.format(
            focus="skill or capability",
            covered="the response",
            sources="the instruction or reference response",
        ),
        max_new_tokens=1024,
        temperature=0.0,
    ),
}


def _description_user(subject: str, scoped: str) -> str:
    return f"""\
## Task
You are given a set of phrases, each summarizing the {subject} needed to {scoped} within a specific group. There are {{group_number}} groups in total. Your task is to **summarize** the collective set of {subject} that represents the union of these descriptions in a detailed and informative manner.

## Skill Descriptions
{{skill_descriptions}}

## Requirements
- The output should be a **single gerund phrase** that succinctly summarizes the overarching {subject.replace("skills or capabilities", "skill or capability")} represented by the union of all the provided phrases.
- The output should comprehensively cover each skill description without going beyond them.
- The output should not simply enumerate the given phrases but instead provide a meaningful and informative summary of the {subject} they collectively represent.
- Please output **only a gerund phrase** summarizing the {subject.replace("skills or capabilities", "skill or capability")}, with NO additional text."""


DESCRIPTION_TEMPLATES: dict[str, PromptTemplate] = {
    "math": PromptTemplate(
        name="description-math",
        system=(
            "Given a set of phrases, each summarizing the mathematical skills or capabilities "
            "needed to solve questions within a specific group, generate a gerund phrase that "
            "summarizes the collective set of mathematical skills or capabilities described "
            "across all groups."
        ),
        user=_description_user("mathematical skills or capabilities", "solve questions"),
        max_new_tokens=1024,
        temperature=0.0,
    ),
    "mmlu": PromptTemplate(
        name="description-mmlu",
        system=(
            "Given a set of phrases, each summarizing the skills or capabilities needed to "
            "answer multiple-choice questions testing broad knowledge and reasoning within a "
            "specific group, generate a gerund phrase that summarizes the collective set of "
            "skills or capabilities described across all groups."
        ),
        user=_description_user(
            "skills or capabilities",
            "answer multiple-choice questions testing broad knowledge and reasoning",
        ),
        max_new_tokens=1024,
        temperature=0.0,
    ),
    "code": PromptTemplate(
        name="description-code",
        system=(
            "Given a set of phrases, each summarizing the coding skills or capabilities needed "
            "to solve code generation problems involving data science tasks within a specific "
            "group, generate a phrase that encapsulates the common coding skill or capability "
            "required across all the groups. The overall description should comprehensively "
            "cover each skill description without going beyond them, avoiding generic terms."
        ),
        user="""\
## Task
You are given a set of phrases, each summarizing the coding skills or capabilities needed to solve code generation problems involving data science tasks within a specific group. There are {group_number} groups in total. Your task is to **summarize** the common coding skill or capability that represents the union of these descriptions in a detailed and informative manner.

## Skill Descriptions
{skill_descriptions}

## Requirements
The output should be a **single phrase** that succinctly summarizes the overarching coding skill or capability shared across all groups. It should not introduce any new concepts outside of those described in the provided phrases and must remain informative.

Please output **only a phrase** summarizing the skill or capability, with no additional text. Any output other than a phrase will NOT be accepted!""",
        max_new_tokens=1024,
        temperature=0.0,
    ),
    "instruction": PromptTemplate(
        name="description-instruction",
        system=(
            "Given a set of phrases, each summarizing the skills or capabilities needed to "
            "respond to instructions within a specific group, generate a gerund phrase that "
            "summarizes the collective set of skills or capabilities described across all "
            "groups."
        ),
        user=_description_user("skills or capabilities", "respond to instructions"),
        max_new_tokens=1024,
        temperature=0.0,
    ),
}


JUDGE_TEMPLATE = PromptTemplate(
    name="pairwise-judge",
    system=(
        "You are a helpful assistant in evaluating the quality of the outputs for a given "
        "instruction. Your goal is to select the best output for the given instruction."
    ),
    user="""\
Select the Output (a) or Output (b) that is better for the given instruction. The two outputs are generated by two different AI chatbots respectively.

Do NOT provide any explanation for your choice.
Do NOT say both / neither are good.
You should answer using ONLY "Output (a)" or "Output (b)". Do NOT output any other words.

# Instruction:
{instruction}

# Output (a):
{response_1}

# Output (b):
{response_2}

# Which is better, Output (a) or Output (b)? Your response should be either "Output (a)" or "Output (b)":""",
    max_new_tokens=50,
    temperature=0.0,
)


def _association_user(head: str, skill: str, act: str) -> str:
    return f"""\
{head}

## Skill or Capability
{{capability}}

## Requirement
If the provided {skill} is required by the key aspects of {act}, output YES. Otherwise, output NO.
You should output either YES or NO with no additional text, otherwise, the output will NOT be accepted."""


ASSOCIATION_TEMPLATES: dict[str, PromptTemplate] = {
    "math": PromptTemplate(
        name="association-math",
        system=(
            "Given a mathematical question and its correct solution, check whether the provided "
            "mathematics skill or capability is required by the key aspects of the solution."
        ),
        user=_association_user(
            "## Question\n{input}\n\n## Solution\n{output}",
            "mathematics skill or capability",
            "the solution",
        ),
        max_new_tokens=128,
        temperature=0.0,
    ),
    "instruction": PromptTemplate(
        name="association-instruction",
        system=(
            "Given a user instruction and a reference response to the instruction, check whether "
            "the provided skill or capability is required by the key aspects of responding to "
            "the instruction."
        ),
        user=_association_user(
            "## Instruction\n{input}\n\n## Response\n{output}",
            "skill or capability",
            "responding to the instruction",
        ),
        max_new_tokens=128,
        temperature=0.0,
    ),
    "code": PromptTemplate(
        name="association-code",
        system=(
            "Given a Python coding problem (involving data science) and its correct Python "
            "implementation, check whether the provided coding skill or capability is required "
            "by the key aspects of the implementation."
        ),
        user=_association_user(
            "## Problem\n{input}\n\n## Implementation\n{output}",
            "coding skill or capability",
            "the implementation",
        ),
        max_new_tokens=128,
        temperature=0.0,
    ),
}


_DIAGNOSTIC_TAIL = """\
## Requirements
- **Output exactly 20 weaknesses.**
{extra}- Each weakness should be an **informative and detailed phrase** that refers to a **specific skill or capability** comprehensively covering key aspects of the failure, without including any specifics from {sources}.
- Where possible, group related weaknesses under a single broader weakness category.
- Output each capability as a standalone phrase, with **no additional text, prefixes, symbols, or notations** on any line. For example, do NOT include numbered list markers, numerical prefixes, or numeric labels (e.g., '1.', '2.', etc.) in the output."""

_DIAGNOSTIC_POSITIVE_PHRASING = (
    "- Each weakness should be phrased as a specific capability, avoiding negative phrasing "
    "such as \"lack,\" \"difficulty,\" or similar terms.\n"
)


DIAGNOSTIC_TEMPLATES: dict[str, PromptTemplate] = {
    "math": PromptTemplate(
        name="diagnostic-math",
        system="""\
Given a set of mathematics questions and their corresponding correct solutions, identify the specific weaknesses of a model.

You are provided with 50 mathematics questions that the model fails to solve and 50 mathematics questions that the model successfully solves. Based on this data, analyze and describe the model's weaknesses by identifying the high-level mathematical capabilities that the model struggles with. Group similar weaknesses under broader categories where applicable.""",
        user="""\
## Task
You are given 50 mathematics questions that the model fails to solve and their corresponding correct solutions, along with 50 questions that the model successfully solves. Analyze and describe the weaknesses of the model by identifying specific high-level mathematical capabilities it struggles with, summarizing any related weaknesses under broader categories.

## Questions and Solutions
### Failed Cases
{negative_inputs_and_outputs}

### Successful Cases
{positive_inputs_and_outputs}

"""
        + _DIAGNOSTIC_TAIL.format(extra="", sources="the questions or solutions"),
        max_new_tokens=4096,
        temperature=0.0,
    ),
    "instruction": PromptTemplate(
        name="diagnostic-instruction",
        system="""\
Given a set of user instructions and their corresponding reference responses, identify the specific weaknesses of a model.

You are provided with 50 user instructions and their corresponding reference responses that the model fails to address effectively, and 50 user instructions and their corresponding reference responses that the model addresses successfully. Based on this data, analyze and describe the model's weaknesses by identifying the high-level capabilities it struggles with. Group similar weaknesses under broader categories where applicable.""",
        user="""\
## Task
You are given 50 user instructions and their corresponding reference responses that the model fails to address effectively, along with 50 user instructions and their corresponding reference responses that the model addresses successfully. Analyze and describe the weaknesses of the model by identifying specific high-level capabilities it struggles with, summarizing any related weaknesses under broader categories.

## User Instructions and Reference Responses
### Failed Cases
{negative_inputs_and_outputs}

### Successful Cases
{positive_inputs_and_outputs}

"""
        + _DIAGNOSTIC_TAIL.format(
            extra=_DIAGNOSTIC_POSITIVE_PHRASING,
            sources="the instructions or reference responses",
        ),
        max_new_tokens=4096,
        temperature=0.0,
    ),
    "code": PromptTemplate(
        name="diagnostic-code",
        system="""\
Given a set of Python coding problems (involving data science) and their corresponding correct Python implementations, identify the specific weaknesses of a model.

You are provided with 50 code generation problems that the model fails to solve and 50 code generation problems that the model successfully solves. Based on this data, analyze and describe the model's weaknesses by identifying the high-level coding capabilities (related to data science) that the model struggles with. Group similar weaknesses under broader categories where applicable.""",
        user="""\
## Task
You are given 50 Python coding problems (involving data science) that the model fails to solve and their corresponding correct Python implementations, along with 50 coding problems that the model successfully solves. Analyze and describe the weaknesses of the model by identifying specific high-level coding capabilities it struggles with, summarizing any related weaknesses under broader categories.

## Problems and Implementations
### Failed Cases
{negative_inputs_and_outputs}

### Successful Cases
{positive_inputs_and_outputs}

"""
        + _DIAGNOSTIC_TAIL.format(
            extra=_DIAGNOSTIC_POSITIVE_PHRASING,
            sources="the code problems or implementations",
        ),
        max_new_tokens=4096,
        temperature=0.0,
    ),
}


_CATEGORIZE_TAIL = """\
## Requirements
- Each capability should be an **informative and detailed phrase** that refers to a **specific skill or capability** comprehensively covering key aspects of {covered}, without including any specifics from {sources}.
- Where possible, group related capabilities under a single broader capability.
- Output each capability as a standalone phrase, with **no additional text, prefixes, symbols, or notations** on any line."""


CATEGORIZE_INITIALIZATION_TEMPLATES: dict[str, PromptTemplate] = {
    "math": PromptTemplate(
        name="categorize-init-math",
        system=(
            "Given a set of mathematics questions and their corresponding correct solutions, "
            "identify the high-level mathematical capabilities required to solve these "
            "questions. Group similar capabilities where relevant."
        ),
        user="""\
## Task
You are given {instance_num} mathematics questions and their corresponding correct solutions. Identify the high-level mathematical capabilities required to solve these questions, summarizing any related capabilities under broader categories.

## Questions and Solutions
{inputs_and_outputs}

"""
        + _CATEGORIZE_TAIL.format(covered="the solution", sources="the questions or solutions"),
        max_new_tokens=4096,
        temperature=0.0,
    ),
    "instruction": PromptTemplate(
        name="categorize-init-instruction",
        system=(
            "Given a set of user instructions and their corresponding reference responses, "
            "identify the high-level capabilities required to respond effectively to these "
            "instructions. Group similar capabilities where relevant."
        ),
        user="""\
## Task
You are given {instance_num} user instructions and their corresponding reference responses. Identify the high-level capabilities required to respond effectively to these instructions, summarizing any related capabilities under broader categories.

## User Instructions and Reference Responses
{inputs_and_outputs}

"""
        + _CATEGORIZE_TAIL.format(
            covered="the response", sources="the instructions or reference responses"
        ),
        max_new_tokens=4096,
        temperature=0.0,
    ),
    "code": PromptTemplate(
        name="categorize-init-code",
        system=(
            "Given a set of Python coding problems and their corresponding correct "
            "implementations, identify the high-level programming capabilities required to "
            "solve these problems. Group similar capabilities where relevant."
        ),
        user="""\
## Task
You are given {instance_num} Python coding problems and their corresponding correct implementations. Identify the high-level programming capabilities required to solve these problems, summarizing any related capabilities under broader categories.

## Problems and Implementations
{inputs_and_outputs}

"""
        + _CATEGORIZE_TAIL.format(covered="the solution", sources="the problems or implementations"),
        max_new_tokens=4096,
        temperature=0.0,
    ),
}


def _shrink_user(noun: str, skill: str) -> str:
    return f"""\
## Task
You are given {{current_num_capabilities}} {noun}. Generate a list of no more than 20 capabilities by merging related capabilities into broader items where relevant.

## Capabilities
{{capability_list}}

## Requirements
- You should output **up to 20 capabilities**, ideally exactly 20.
- Each capability should be an **informative and concise phrase** that represents a **{skill}** while covering key aspects of the capabilities provided.
- Consolidate related capabilities into a single, broader capability wherever possible to reduce the list length.
- Output each capability as a standalone phrase, with **no additional text, prefixes, symbols, or notations** on any line."""


CATEGORIZE_SHRINKING_TEMPLATES: dict[str, PromptTemplate] = {
    "math": PromptTemplate(
        name="categorize-shrink-math",
        system=(
            "Given a list of mathematics capabilities, generate a shorter list of the most "
            "critically relevant capabilities by combining related items where appropriate."
        ),
        user=_shrink_user("mathematics capabilities", "specific skill or capability"),
        max_new_tokens=4096,
        temperature=0.0,
    ),
    "instruction": PromptTemplate(
        name="categorize-shrink-instruction",
        system=(
            "Given a list of capabilities required for responding to user instructions, "
            "generate a shorter list of the most critically relevant capabilities by combining "
            "related items where appropriate."
        ),
        user=_shrink_user(
            "capabilities related to responding to user instructions",
            "specific skill or capability",
        ),
        max_new_tokens=4096,
        temperature=0.0,
    ),
    "code": PromptTemplate(
        name="categorize-shrink-code",
        system=(
            "Given a list of capabilities required for solving Python coding problems, generate "
            "a shorter list of the most critically relevant capabilities by combining related "
            "items where appropriate."
        ),
        user=_shrink_user(
            "capabilities related to solving Python coding problems",
            "specific programming skill or capability",
        ),
        max_new_tokens=4096,
        temperature=0.0,
    ),
}


_SCORING_TAIL = """\
## Requirements
- For each capability, provide an integer **score from 1 to 5**. A score of 5 means the capability is very used, while 1 means it is not used at all.
- Include a brief **reasoning** for each score, explaining how you determined the score.
- Output the result in **JSON format** as follows:
  ```json
  {
    "1": {"reasoning": "THE REASONING", "score": SCORE},
    "2": {"reasoning": "THE REASONING", "score": SCORE},
    "3": {"reasoning": "THE REASONING", "score": SCORE},
    ...
  }
  ```
- Do NOT include any additional text outside of the JSON format, as **I will directly use `json.loads' in Python to convert your output to a dictionary object**."""


CATEGORIZE_SCORING_TEMPLATES: dict[str, PromptTemplate] = {
    "math": PromptTemplate(
        name="categorize-score-math",
        system=(
            "Given a mathematics question with its solution and a numbered list of mathematical "
            "capabilities, rate each capability on a scale of 1-5 to indicate its relevance in "
            "solving this question. A score of 5 means the capability is very used, while 1 "
            "means it is not used at all."
        ),
        user="""\
## Task
You are given a mathematics question and solution, along with a list of {capability_num} mathematical capabilities. For each capability, rate the degree to which it is required to solve this question.

## Question
{input}

## Solution
{output}

## Capabilities
{capability_list}

"""
        + _SCORING_TAIL,
        max_new_tokens=4096,
        temperature=0.0,
    ),
    "instruction": PromptTemplate(
        name="categorize-score-instruction",
        system=(
            "Given a user instruction with its reference response and a numbered list of "
            "capabilities, rate each capability on a scale of 1-5 to indicate its relevance in "
            "responding to this instruction. A score of 5 means the capability is very used, "
            "while 1 means it is not used at all."
        ),
        user="""\
## Task
You are given a user instruction and its reference response, along with a list of {capability_num} capabilities. For each capability, rate the degree to which it is required to respond to this instruction.

## User Instruction
{input}

## Reference Response
{output}

## Capabilities
{capability_list}

"""
        + _SCORING_TAIL,
        max_new_tokens=4096,
        temperature=0.0,
    ),
    "code": PromptTemplate(
        name="categorize-score-code",
        system=(
            "Given a Python coding problem with its correct implementation and a numbered list "
            "of capabilities, rate each capability on a scale of 1-5 to indicate its relevance "
            "in solving this problem. A score of 5 means the capability is very used, while 1 "
            "means it is not used at all."
        ),
        user="""\
## Task
You are given a Python coding problem and its correct implementation, along with a list of {capability_num} capabilities. For each capability, rate the degree to which it is required to solve this problem.

## Coding Problem
{input}

## Correct Implementation
{output}

## Capabilities
{capability_list}

"""
        + _SCORING_TAIL,
        max_new_tokens=4096,
        temperature=0.0,
    ),
}


INPUT_GENERATION_TEMPLATES: dict[str, PromptTemplate] = {
    "math": PromptTemplate(
        name="input-generation-math",
        system=(
            "You are a creative and logical assistant tasked with generating new mathematics "
            "questions. Your goal is to create a single, clear question aligned with a given "
            "mathematical capability."
        ),
        user="""\
## Task
Generate one unique mathematics question demonstrating the following capability:
{capability}

Please ensure the following:
- You will be given {instance_num} example questions for reference. Use the examples solely to understand the capability, NOT as templates, i.e., the generated question must not replicate, paraphrase, or directly resemble the example questions in structure, wording, or context.
- The question must ask for only one result, such as a numerical value, while adhering to logical constraints (e.g., quantities must be positive, and counts for people must be integers).

## Provided Examples
{example_inputs}

## Requirements
- Do NOT include a solution in the generated question.
- Ensure the question is plausible, reasonable, and relevant to the given capability.""",
        max_new_tokens=4096,
        temperature=1.0,
    ),
    "code": PromptTemplate(
        name="input-generation-code",
        system=(
            "You are a creative and logical assistant tasked with generating new Python "
            "programming problems. Your goal is to create a single, clear problem aligned with "
            "a given data science capability."
        ),
        user="""\
## Task
Generate one unique Python programming problem demonstrating the following capability:
{capability}

Please ensure the following:
- You will be given {instance_num} example problems for reference. Use the examples solely to understand the capability and the desired problem format. The generated problem must not replicate, paraphrase, or directly resemble the example problems in structure, wording, or context.
- The problem must ask for one piece of Python code that fills in a blank, ensuring clarity and conciseness while being grounded in real-world data science scenarios.

## Provided Examples
{example_inputs}

## Requirements
- Do NOT include a solution in the generated problem. Please output the generated problem directly, without any additional text, explanation, or commentary.
- Ensure the problem is plausible, reasonable, and relevant to the given capability.
- Adhere to logical programming constraints, such as correct syntax and realistic data or outcomes.""",
        max_new_tokens=4096,
        temperature=1.0,
    ),
}
