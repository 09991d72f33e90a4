# coding: utf-8

# # The LLM engine without an LLM
#
# The LLM engine renders prompts, sends them to a chat-completion endpoint and
# parses the reply. The mock engine plugs an in-process responder into the
# same path, so the whole prompt -> text -> parse round trip runs offline.
# The responder answers with the equation engine's numbers, which lets us
# check that nothing is lost in translation.

# In[1]:

from echosim import EquationEngine, MockEngine, SimConfig, run
from echosim.llm import DEFAULT_TEMPLATES, ResponseKind, TemplateKind, parse_response
from echosim.synthetic import random_social_graph


# Every template asks the model to reason step by step and then finish with a
# fixed output line. Here is the one used to score a neighbour.

# In[2]:

print(DEFAULT_TEMPLATES[TemplateKind.REWIRE].body)


# Replies are parsed from the last schema line. Sloppy output is often still
# recoverable, and the status says how much repair was needed.

# In[3]:

for raw in ["Thinking it over...\nSTANCE: 0.35",
            "STA\nNCE: -0 .4",
            "**Stance** = 0.9",
            "STANCE: 3",
            "Sorry, I can't share an opinion on that."]:
    r = parse_response(raw, ResponseKind.STANCE)
    print("%-45r -> %-9s %s" % (raw, r.status.value, r.value))


# Now the same 300-step run twice, once with the equation engine and once
# through the mock pipeline. The trajectories should match exactly.

# In[4]:

g = random_social_graph(100, 0.03, seed=4)
cfg = SimConfig(seed=4, max_steps=300, stability_delta=0.0)

eq = run(g, cfg, EquationEngine(cfg.equation_params))
mock = MockEngine(cfg.equation_params)
mk = run(g, cfg, mock)

same = [(a.actor, a.opinion_after, a.unfollowed, a.followed) ==
        (b.actor, b.opinion_after, b.unfollowed, b.followed)
        for a, b in zip(eq.events, mk.events)]
print("identical steps: %d / %d" % (sum(same), len(same)))
print("prompts sent:", mock.stats.calls, " parse failures:", mock.stats.failed)


# The text differs though: the mock writes a sentence where the equation
# engine writes a placeholder.

# In[5]:

print(eq.events[-1].new_post.text)
print(mk.events[-1].new_post.text)


# For a real endpoint, set `ECHOSIM_LLM_URL` (plus `ECHOSIM_LLM_KEY` and
# `ECHOSIM_LLM_MODEL`) and use `engine = llm` in the CLI config. Responses are
# cached on disk, so reruns replay without the network.
