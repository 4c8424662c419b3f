#!/usr/bin/env python3
"""Expands the compact scenario plans below into the golden corpus.

For every plan this writes the simulator scenario, the test case, an aligned
multi-agent transcript, a combined single-agent transcript and the golden
persistent script. Golden scripts are derived from the plan alone: each
planned action with its parameter value bound, in step order.

Run from this directory: python3 generate.py
"""

import json
from pathlib import Path

HERE = Path(__file__).resolve().parent
W, H = 360, 640
INPUT_SKILLS = {"input_text": "text", "input_by_numeric_keyboard": "digits"}


def title(text):
    return {"class": "android.widget.TextView", "text": text, "bounds": [0, 0, W, 48]}


def stack(*widgets, top=60, height=44, gap=8):
    """Lays widgets out as full-width rows below the title."""
    out = []
    y = top
    for wd in widgets:
        wd = dict(wd)
        wd.setdefault("bounds", [16, y, W - 16, y + height])
        out.append(wd)
        y += height + gap
    return out


def button(rid, text, **kw):
    return {"class": "android.widget.Button", "resource_id": rid, "text": text, "clickable": True, **kw}


def field(rid, hint):
    return {"class": "android.widget.EditText", "resource_id": rid, "text": hint, "clickable": True}


def label(text):
    return {"class": "android.widget.TextView", "text": text}


def picker(rid, value, values):
    return {"class": "android.widget.NumberPicker", "resource_id": rid, "text": value,
            "scrollable": True, "selector_values": values}


def link_text(rid, text, bounds, link_bounds, link):
    return {"class": "android.widget.TextView", "resource_id": rid, "text": text, "clickable": True,
            "bounds": bounds, "links": [{"bounds": link_bounds, "text": link}]}


def keyboard(heading):
    """Title plus a 3x4 numeric keypad with unlabelled digit keys."""
    widgets = [title(heading), label_at("Password", [16, 80, W - 16, 120])]
    keys = ["1", "2", "3", "4", "5", "6", "7", "8", "9", None, "0", None]
    for i, k in enumerate(keys):
        if k is None:
            continue
        col, row = i % 3, i // 3
        x, y = col * 120, 400 + row * 60
        widgets.append({"class": "android.widget.Button", "text": k, "clickable": True,
                        "bounds": [x, y, x + 120, y + 60]})
    return {"widgets": widgets}


def label_at(text, bounds):
    return {"class": "android.widget.TextView", "text": text, "bounds": bounds}


def page(heading, *widgets):
    return {"widgets": [title(heading)] + stack(*widgets)}


def on(frm, skill, to, **args):
    return {"from": frm, "to": to, "trigger": {"skill": skill, "args": args}}


def click(frm, rid, to):
    return on(frm, "click", to, rid=rid)


def pay(frm, to, param="pay_password"):
    return on(frm, "input_by_numeric_keyboard", to, digits="${" + param + "}")


def act(command, param=None, **args):
    return {"command": command, "param": param, "args": args}


def step(text, page_after, *actions):
    return {"text": text, "page_after": page_after, "actions": list(actions)}


def template(p1, p2):
    return f"System requests User to {p1}, and System validates the result feedback from User is {p2}."


PLANS = []

PLANS.append({
    "id": "bind_card",
    "params": {"bank_name": "ICBC", "pay_password": "135790", "phone_number": "13800138000"},
    "initial": "home", "terminal": ["bound"],
    "pages": {
        "home": page("Home", button("tab_chats", "Chats"), button("tab_me", "Me")),
        "me": page("Me", button("wallet", "Wallet"), button("settings", "Settings")),
        "wallet": page("Wallet", button("bank_cards", "Bank Cards"), button("balance", "Balance")),
        "cards": page("Bank Cards", label("No card bound yet"), button("add_card", "Add Card")),
        "bank_list": page("Select Bank", button("bank_icbc", "ICBC"), button("bank_cmb", "China Merchants Bank"),
                          button("bank_boc", "Bank of China")),
        "agreement": {"widgets": [
            title("Bind Card"),
            label_at("Binding a card without entering its number", [16, 60, W - 16, 100]),
            link_text("agree_terms", "I have read and agree to 《Card Binding Agreement》", [16, 120, W - 16, 160],
                      [196, 130, 336, 146], "《Card Binding Agreement》"),
        ]},
        "password": keyboard("Enter Payment Password"),
        "bound": page("Card Bound", label("ICBC card bound successfully")),
    },
    "transitions": [
        click("home", "tab_me", "me"), click("me", "wallet", "wallet"), click("wallet", "bank_cards", "cards"),
        click("cards", "add_card", "bank_list"), click("bank_list", "bank_icbc", "agreement"),
        click("agreement", "agree_terms", "password"), pay("password", "bound"),
    ],
    "steps": [
        step("Open the Me tab", "me", act("click", rid="tab_me")),
        step(template("open the wallet", "entering wallet"), "wallet", act("click", rid="wallet")),
        step("Open Bank Cards and tap Add Card", "bank_list",
             act("click", rid="bank_cards"), act("click", rid="add_card")),
        step(template("select a bank for card-less binding", "selecting bank"), "agreement",
             act("click", rid="bank_icbc")),
        step("Agree to the card binding agreement", "password", act("click", rid="agree_terms")),
        step(template("set payment password", "submitting payment password"), "bound",
             act("input_by_numeric_keyboard", param="pay_password")),
    ],
})

PLANS.append({
    "id": "transfer_money",
    "params": {"payee_account": "6217000010002000", "transfer_amount": "250", "pay_password": "246810"},
    "initial": "wallet", "terminal": ["transferred"],
    "pages": {
        "wallet": page("Wallet", button("transfer", "Transfer"), button("bank_cards", "Bank Cards")),
        "transfer_form": page("Transfer to Bank Card", field("payee_account", "Card number of payee"),
                              field("amount", "Amount"), button("next", "Next")),
        "confirm": page("Confirm Transfer", label("Transfer to bank card"), button("confirm", "Confirm")),
        "password": keyboard("Enter Payment Password"),
        "transferred": page("Transfer Submitted", label("The payee will receive the money within 2 hours")),
    },
    "transitions": [
        click("wallet", "transfer", "transfer_form"), click("transfer_form", "next", "confirm"),
        click("confirm", "confirm", "password"), pay("password", "transferred"),
    ],
    "steps": [
        step("Open Transfer", "transfer_form", act("click", rid="transfer")),
        step("Enter the payee card number", "transfer_form",
             act("input_text", param="payee_account", rid="payee_account")),
        step(template("transfer money to the card", "filling transfer amount"), "transfer_form",
             act("input_text", param="transfer_amount", rid="amount")),
        step("Tap Next", "confirm", act("click", rid="next")),
        step("Confirm the transfer", "password", act("click", rid="confirm")),
        step(template("enter payment password", "submitting payment password"), "transferred",
             act("input_by_numeric_keyboard", param="pay_password")),
    ],
})

PLANS.append({
    "id": "change_payment_password",
    "params": {"old_password": "111222", "new_password": "864209"},
    "initial": "me", "terminal": ["changed"],
    "pages": {
        "me": page("Me", button("wallet", "Wallet"), button("settings", "Settings")),
        "wallet": page("Wallet", button("wallet_menu", "Wallet Settings"), button("balance", "Balance")),
        "security": page("Payment Security", button("change_pw", "Change Payment Password"),
                         button("forgot_pw", "Forgot Payment Password")),
        "old_pw": keyboard("Enter Current Payment Password"),
        "new_pw": keyboard("Set New Payment Password"),
        "changed": page("Password Changed", label("Payment password updated")),
    },
    "transitions": [
        click("me", "wallet", "wallet"), click("wallet", "wallet_menu", "security"),
        click("security", "change_pw", "old_pw"), pay("old_pw", "new_pw", "old_password"),
        pay("new_pw", "changed", "new_password"),
    ],
    "steps": [
        step(template("open the wallet", "entering wallet"), "wallet", act("click", rid="wallet")),
        step("Open Wallet Settings", "security", act("click", rid="wallet_menu")),
        step("Tap Change Payment Password", "old_pw", act("click", rid="change_pw")),
        step("Enter the current payment password (Use numeric keyboard)", "new_pw",
             act("input_by_numeric_keyboard", param="old_password")),
        step("Enter the new payment password (Use numeric keyboard)", "changed",
             act("input_by_numeric_keyboard", param="new_password")),
    ],
})

YEARS = [str(y) for y in range(1986, 1996)]
MONTHS = [f"{m:02d}" for m in range(1, 13)]

PLANS.append({
    "id": "change_birthday",
    "params": {"birth_year": "1992", "birth_month": "03"},
    "initial": "me", "terminal": ["saved"],
    "pages": {
        "me": page("Me", button("profile", "Profile"), button("settings", "Settings")),
        "profile": page("Profile", button("birthday", "Birthday"), button("region", "Region")),
        "birthday_picker": {"widgets": [
            title("Birthday"),
            picker("year", "1990", YEARS) | {"bounds": [16, 200, 176, 320]},
            picker("month", "01", MONTHS) | {"bounds": [184, 200, 344, 320]},
            button("save", "Save") | {"bounds": [16, 560, 344, 604]},
        ]},
        "saved": page("Profile", label("Birthday updated")),
    },
    "transitions": [
        click("me", "profile", "profile"), click("profile", "birthday", "birthday_picker"),
        click("birthday_picker", "save", "saved"),
    ],
    "steps": [
        step("Open Profile", "profile", act("click", rid="profile")),
        step("Tap Birthday", "birthday_picker", act("click", rid="birthday")),
        step("Set the year to ${birth_year}", "birthday_picker",
             act("swipe_selector", rid="year", direction="down"), act("swipe_selector", rid="year", direction="down")),
        step("Set the month to ${birth_month}", "birthday_picker",
             act("swipe_selector", rid="month", direction="down"), act("swipe_selector", rid="month", direction="down")),
        step("Tap Save", "saved", act("click", rid="save")),
    ],
})

PLANS.append({
    "id": "view_bill",
    "params": {"bill_month": "March"},
    "initial": "me", "terminal": ["bills_more"],
    "pages": {
        "me": page("Me", button("wallet", "Wallet"), button("settings", "Settings")),
        "wallet": page("Wallet", button("bills", "Bills"), button("balance", "Balance")),
        "bills": {"widgets": [title("Bills")] + stack(
            button("bill_may", "May order 35.00"), button("bill_apr", "April order 12.50"),
            {"class": "androidx.recyclerview.widget.RecyclerView", "resource_id": "bill_list",
             "content_desc": "Bill list", "scrollable": True, "bounds": [0, 48, W, H]})},
        "bills_more": {"widgets": [title("Bills")] + stack(
            button("bill_mar", "March order 88.00"), button("bill_feb", "February order 9.90"),
            {"class": "androidx.recyclerview.widget.RecyclerView", "resource_id": "bill_list",
             "content_desc": "Bill list", "scrollable": True, "bounds": [0, 48, W, H]})},
        "bill_detail": page("Bill Details", label("March order 88.00"), label("Paid with ICBC card")),
    },
    "transitions": [
        click("me", "wallet", "wallet"), click("wallet", "bills", "bills"),
        on("bills", "scroll", "bills_more", direction="down"), click("bills_more", "bill_mar", "bill_detail"),
    ],
    "steps": [
        step(template("open the wallet", "entering wallet"), "wallet", act("click", rid="wallet")),
        step("Open Bills", "bills", act("click", rid="bills")),
        step("Scroll down to the ${bill_month} order", "bills_more", act("scroll", direction="down")),
        step("Open the ${bill_month} order", "bill_detail", act("click", rid="bill_mar")),
        step("Go back to the bill list", "bills_more", act("press_adb_back_key")),
    ],
})

PLANS.append({
    "id": "red_packet",
    "params": {"packet_amount": "6.66", "packet_greeting": "Happy new year", "pay_password": "975310"},
    "initial": "chats", "terminal": ["sent"],
    "pages": {
        "chats": page("Chats", button("chat_alice", "Alice"), button("chat_bob", "Bob")),
        "chat": {"widgets": [title("Alice"), label_at("See you tomorrow", [16, 60, 250, 100]),
                             {"class": "android.widget.ImageButton", "resource_id": "more",
                              "content_desc": "More functions", "clickable": True, "bounds": [300, 590, 350, 630]}]},
        "chat_extras": {"widgets": [title("Alice")] + stack(button("album", "Album"), button("red_packet", "Red Packet"),
                                                           button("transfer", "Transfer"), top=420)},
        "packet_form": page("Send Red Packet", field("amount", "Amount"), field("greeting", "Best wishes"),
                            button("prepare", "Prepare Red Packet")),
        "password": keyboard("Enter Payment Password"),
        "sent": page("Alice", label("Red packet sent")),
    },
    "transitions": [
        click("chats", "chat_alice", "chat"), click("chat", "more", "chat_extras"),
        click("chat_extras", "red_packet", "packet_form"), click("packet_form", "prepare", "password"),
        pay("password", "sent"),
    ],
    "steps": [
        step("Open the chat with Alice", "chat", act("click", rid="chat_alice")),
        step("Open the extra functions panel", "chat_extras", act("click", rid="more")),
        step("Tap Red Packet", "packet_form", act("click", rid="red_packet")),
        step("Enter the red packet amount", "packet_form", act("input_text", param="packet_amount", rid="amount")),
        step("Enter the greeting", "packet_form", act("input_text", param="packet_greeting", rid="greeting")),
        step("Tap Prepare Red Packet", "password", act("click", rid="prepare")),
        step("Submit payment password (Use numeric keyboard)", "sent",
             act("input_by_numeric_keyboard", param="pay_password")),
    ],
})

PLANS.append({
    "id": "unbind_card",
    "params": {"pay_password": "314159"},
    "initial": "cards", "terminal": ["unbound"],
    "pages": {
        "cards": page("Bank Cards", button("card_icbc", "ICBC Debit 8888"), button("card_cmb", "CMB Credit 1234")),
        "card_detail": {"widgets": [title("ICBC Debit 8888"), label_at("Daily limit 50000", [16, 60, 300, 100]),
                                    {"class": "android.widget.ImageButton", "resource_id": "card_menu",
                                     "content_desc": "Card menu", "clickable": True, "bounds": [310, 4, 356, 44]}]},
        "card_menu": {"widgets": [title("ICBC Debit 8888")] + stack(button("unbind", "Unbind Card"),
                                                                    button("cancel", "Cancel"), top=500)},
        "unbind_confirm": page("Unbind Card", label("The card can no longer be used for payments"),
                               button("confirm_unbind", "Unbind")),
        "password": keyboard("Verify Payment Password"),
        "unbound": page("Bank Cards", button("card_cmb", "CMB Credit 1234")),
    },
    "transitions": [
        click("cards", "card_icbc", "card_detail"), click("card_detail", "card_menu", "card_menu"),
        click("card_menu", "unbind", "unbind_confirm"), click("unbind_confirm", "confirm_unbind", "password"),
        pay("password", "unbound"),
    ],
    "steps": [
        step("Open the ICBC card", "card_detail", act("click", rid="card_icbc")),
        step("Open the card menu", "card_menu", act("click", rid="card_menu")),
        step("Tap Unbind Card", "unbind_confirm", act("click", rid="unbind")),
        step("Confirm unbinding", "password", act("click", rid="confirm_unbind")),
        step(template("verify payment password", "submitting payment password"), "unbound",
             act("input_by_numeric_keyboard", param="pay_password")),
    ],
})

PLANS.append({
    "id": "real_name_verification",
    "params": {"real_name": "Li Lei", "id_number": "110101199003074514"},
    "initial": "security", "terminal": ["verified"],
    "pages": {
        "security": page("Account Security", button("verify", "Real-name Verification"),
                         button("devices", "Login Devices")),
        "id_form": {"widgets": [
            title("Real-name Verification"),
            field("name_field", "Name") | {"bounds": [16, 60, W - 16, 104]},
            field("id_field", "ID number") | {"bounds": [16, 112, W - 16, 156]},
            link_text("privacy", "I agree to 《Personal Information Protection Policy》", [16, 180, W - 16, 220],
                      [150, 190, 340, 206], "《Personal Information Protection Policy》"),
            button("submit", "Submit") | {"bounds": [16, 560, W - 16, 604]},
        ]},
        "id_form_agreed": {"widgets": [
            title("Real-name Verification"),
            field("name_field", "Name") | {"bounds": [16, 60, W - 16, 104]},
            field("id_field", "ID number") | {"bounds": [16, 112, W - 16, 156]},
            {"class": "android.widget.CheckBox", "resource_id": "privacy_checked", "text": "Policy accepted",
             "bounds": [16, 180, W - 16, 220]},
            button("submit", "Submit") | {"bounds": [16, 560, W - 16, 604]},
        ]},
        "verified": page("Real-name Verification", label("Verification passed")),
    },
    "transitions": [
        click("security", "verify", "id_form"),
        dict(click("id_form", "privacy", "id_form_agreed"), side_effects=[
            {"set_text": {"rid": "name_field", "value": "${real_name}"}},
            {"set_text": {"rid": "id_field", "value": "${id_number}"}},
        ]),
        click("id_form_agreed", "submit", "verified"),
    ],
    "steps": [
        step("Open Real-name Verification", "id_form", act("click", rid="verify")),
        step("Enter the full name", "id_form", act("input_text", param="real_name", rid="name_field")),
        step("Enter the ID number", "id_form", act("input_text", param="id_number", rid="id_field")),
        step("Agree to the personal information protection policy", "id_form_agreed", act("click", rid="privacy")),
        step("Tap Submit", "verified", act("click", rid="submit")),
    ],
})

PLANS.append({
    "id": "qr_payment",
    "params": {"pay_amount": "42.50", "pay_password": "808182"},
    "initial": "discover", "terminal": ["paid"],
    "pages": {
        "discover": page("Discover", button("scan", "Scan"), button("moments", "Moments")),
        "scan": {"widgets": [title("Scan"), {"class": "android.widget.ImageButton", "resource_id": "album",
                                            "content_desc": "Album", "clickable": True, "bounds": [300, 560, 350, 610]}]},
        "album": page("Album", button("photo_qr", "Merchant QR code"), button("photo_cat", "Cat")),
        "pay_form": page("Pay Merchant", label("Coffee Corner"), field("amount", "Amount"), button("pay", "Pay")),
        "password": keyboard("Enter Payment Password"),
        "paid": page("Payment Successful", label("Paid to Coffee Corner")),
    },
    "transitions": [
        click("discover", "scan", "scan"), click("scan", "album", "album"), click("album", "photo_qr", "pay_form"),
        click("pay_form", "pay", "password"), pay("password", "paid"),
    ],
    "steps": [
        step("Open Scan", "scan", act("click", rid="scan")),
        step("Open the album", "album", act("click", rid="album")),
        step("Pick the merchant QR code", "pay_form", act("click", rid="photo_qr")),
        step("Enter the payment amount", "pay_form", act("input_text", param="pay_amount", rid="amount")),
        step("Tap Pay", "password", act("click", rid="pay")),
        step("Submit payment password (Use numeric keyboard)", "paid",
             act("input_by_numeric_keyboard", param="pay_password")),
    ],
})

LIMITS = ["1000", "5000", "10000", "20000", "50000"]

PLANS.append({
    "id": "set_transfer_limit",
    "params": {"daily_limit": "20000", "pay_password": "192837"},
    "initial": "wallet", "terminal": ["limit_set"],
    "pages": {
        "wallet": page("Wallet", button("wallet_menu", "Wallet Settings"), button("balance", "Balance")),
        "wallet_settings": {"widgets": [title("Wallet Settings")] + stack(
            button("security", "Payment Security"), button("auto_deduct", "Auto Deduction"),
            {"class": "android.widget.ScrollView", "resource_id": "settings_list", "content_desc": "Settings",
             "scrollable": True, "bounds": [0, 48, W, H]})},
        "wallet_settings_more": {"widgets": [title("Wallet Settings")] + stack(
            button("transfer_limit", "Transfer Limits"), button("privacy", "Privacy"),
            {"class": "android.widget.ScrollView", "resource_id": "settings_list", "content_desc": "Settings",
             "scrollable": True, "bounds": [0, 48, W, H]})},
        "limit_page": {"widgets": [
            title("Transfer Limits"),
            label_at("Daily limit", [16, 60, W - 16, 100]),
            picker("daily_limit", "5000", LIMITS) | {"bounds": [16, 200, W - 16, 320]},
            button("confirm", "Confirm") | {"bounds": [16, 560, W - 16, 604]},
        ]},
        "password": keyboard("Enter Payment Password"),
        "limit_set": page("Transfer Limits", label("Daily limit updated")),
    },
    "transitions": [
        click("wallet", "wallet_menu", "wallet_settings"),
        on("wallet_settings", "scroll", "wallet_settings_more", direction="down"),
        click("wallet_settings_more", "transfer_limit", "limit_page"), click("limit_page", "confirm", "password"),
        pay("password", "limit_set"),
    ],
    "steps": [
        step("Open Wallet Settings", "wallet_settings", act("click", rid="wallet_menu")),
        step("Scroll down to Transfer Limits", "wallet_settings_more", act("scroll", direction="down")),
        step("Open Transfer Limits", "limit_page", act("click", rid="transfer_limit")),
        step("Raise the daily limit to ${daily_limit}", "limit_page",
             act("swipe_selector", rid="daily_limit", direction="down"),
             act("swipe_selector", rid="daily_limit", direction="down")),
        step("Tap Confirm", "password", act("click", rid="confirm")),
        step("Submit payment password (Use numeric keyboard)", "limit_set",
             act("input_by_numeric_keyboard", param="pay_password")),
    ],
})


def op_args(a):
    args = dict(a["args"])
    if a["command"] in INPUT_SKILLS:
        args[INPUT_SKILLS[a["command"]]] = ""
    return args


def bound_args(a, params):
    args = dict(a["args"])
    if a["command"] in INPUT_SKILLS:
        args[INPUT_SKILLS[a["command"]]] = params[a["param"]]
    return dict(sorted(args.items()))


def describe(a):
    target = a["args"].get("rid") or a["args"].get("direction") or a["param"] or "device"
    return f"{a['command']} on {target}"


def transcripts(plan):
    case = plan["id"]
    multi, single = [], []
    counters = {}

    def push(out, step_no, agent, answer):
        key = (step_no, agent)
        attempt = counters.get((id(out),) + key, 0)
        counters[(id(out),) + key] = attempt + 1
        out.append({"key": {"case": case, "step": step_no, "agent": agent, "attempt": attempt},
                    "response": json.dumps(answer, ensure_ascii=False)})

    steps = plan["steps"]
    for i, s in enumerate(steps, start=1):
        final_step = i == len(steps)
        for k, a in enumerate(s["actions"]):
            last_action = k == len(s["actions"]) - 1
            remaining = len(s["actions"]) - k - 1
            plan_text = "this completes the step" if remaining == 0 else f"{remaining} more action(s) after this one"
            push(multi, i, "op", {
                "reasoning": f"The instruction asks to {s['text'][0].lower() + s['text'][1:]}; the page offers the needed widget.",
                "plan": plan_text,
                "answer": {"command": a["command"], "args": op_args(a), "description": describe(a)},
            })
            if a["param"]:
                push(multi, i, "para", {"reasoning": f"The step needs the value of {a['param']}.", "answer": a["param"]})
            skip_insp = final_step and last_action and s["page_after"] in plan["terminal"]
            if not skip_insp:
                push(multi, i, "insp", {
                    "reasoning": "The page now matches the goal." if last_action else "The step is not finished yet.",
                    "answer": "yes" if last_action else "no",
                })
            push(multi, i, "sum", {"reasoning": "Keep the progress of the step.",
                                   "answer": f"Step {i}: performed {k + 1} of {len(s['actions'])} action(s), last was {describe(a)}."})
            push(single, i, "op", {
                "reasoning": "One agent handles action, parameter and progress.",
                "plan": plan_text,
                "answer": {"command": a["command"], "args": op_args(a), "description": describe(a),
                           "parameter": a["param"], "goal": "yes" if last_action else "no",
                           "summary": f"Step {i}: {k + 1} of {len(s['actions'])} action(s) done."},
            })
    return multi, single


def dump(path, value):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(value, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def main():
    suite, suite_single = [], []
    for plan in PLANS:
        pid = plan["id"]
        scenario = {
            "scenario_id": pid,
            "screen": {"width": W, "height": H},
            "initial_page": plan["initial"],
            "terminal_pages": plan["terminal"],
            "pages": plan["pages"],
            "transitions": plan["transitions"],
        }
        case = {"case_id": pid, "steps": [s["text"] for s in plan["steps"]], "params": plan["params"]}
        script = [{"step": i, "skill": a["command"], "args": bound_args(a, plan["params"]), "result": "APPLIED"}
                  for i, s in enumerate(plan["steps"], start=1) for a in s["actions"]]
        multi, single = transcripts(plan)
        dump(HERE / "scenarios" / f"{pid}.json", scenario)
        dump(HERE / "cases" / f"{pid}.json", case)
        dump(HERE / "transcripts" / f"{pid}.json", multi)
        dump(HERE / "single" / f"{pid}.json", single)
        dump(HERE / "scripts" / f"{pid}.json", script)
        pages = [s["page_after"] for s in plan["steps"]]
        entry = {"case": f"cases/{pid}.json", "scenario": f"scenarios/{pid}.json", "expected_pages": pages}
        suite.append(dict(entry, transcript=f"transcripts/{pid}.json"))
        suite_single.append(dict(entry, transcript=f"single/{pid}.json"))
    dump(HERE / "suite.json", {"cases": suite, "backend": {"kind": "transcript"}})
    dump(HERE / "suite_single.json",
         {"cases": suite_single, "backend": {"kind": "transcript"}, "session": {"mode": "SINGLE_AGENT"}})


if __name__ == "__main__":
    main()
