"""Worked MWPs shared by several test modules."""

UNIFORMS = ("The school makes uniforms for 40 students, known to be 15 dollars per shirt "
            "and 10 dollars per pants.")
UNIFORMS_EQ = "x = 40*(15+10)"
UNIFORMS_QUESTION = "How much did it cost to make these uniforms?"
UNIFORMS_GROUP = {
    "group_id": "uniforms",
    "scenario": UNIFORMS,
    "items": [
        {"question": "How much did it cost to make a uniform?", "equation": "x = 15+10"},
        {"question": "How much did it cost to make these shirts?", "equation": "x = 40*15"},
        {"question": "How much did it cost to make these pants?", "equation": "x = 40*10"},
    ],
}

CANDY = ("The candy in the mall costs 14.60 dollars per box and cookies cost 29.80 dollars per box. "
         "Uncle Li wants to buy 4 boxes of candy and 2 boxes of cookies.")
CANDY_EQ = "x=(14.6*4)+(29.8*2)"

PANTS = "A pair of pants costs 58 dollars, and a jacket costs 4 times as much as a pair of pants."
PANTS_EQ = "x=5*(58+(58*4))"

PAGES = "Dingding has read 180 pages of a book and has 150 pages left to read."
PAGES_EQ = "x=180+150"

MONEY = ("Qiangqiang's father and mother work outside. Father sends Qiangqiang 458 dollars a month "
         "and mother sends Qiangqiang 447 dollars a month.")
MONEY_EQ = "x=458+447"
