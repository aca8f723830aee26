"""Summarization prompt templates.

Both templates have exactly two slots, ``{char_length}`` and
``{document_content}``. Substitution is plain string replacement so that
braces inside the document are never interpreted.
"""
from __future__ import annotations

GENERIC_SYSTEM = "You are an expert legal document summarizer."

GENERIC_USER = (
    "Summarize the following legal document text. Focus on extracting the most important "
    "entities, core purpose, and key legal topics. The summary must be concise, maximum "
    "{char_length} characters long, and optimized for providing context to smaller text "
    "chunks. Output only the summary text.\n"
    "\n"
    "Document: {document_content}"
)

EXPERT_SYSTEM = "You are a legal summarization expert."

EXPERT_USER = """\
Your task is to generate a highly distinct, structured summary of the provided legal document. The primary goal is to extract the unique identifiers that differentiate this document from others of the same type. This summary will be used as context to smaller text chunks for a retrieval system.

Follow this two-step process:

- First, internally identify the document type from the following options: Non-Disclosure Agreement (NDA), Privacy Policy, or Other.

- Second, generate the summary based on the specific template corresponding to the identified document type.

Document type Non-Disclosure Agreement (NDA): An NDA is a legally binding contract between specific parties that outlines confidential information to be kept secret.
If the document is an NDA, your summary should align with the following template:

- Definition of Confidential Information, specifying what types of information are considered confidential, e.g. such as: Technical data, Business plans, Customer lists, Trade secrets, Financial information

- Parties to the Agreement identifying the disclosing party and the receiving party (or both, if mutual NDA), e.g. such as: Full legal names, Affiliates or representatives covered, Roles of each party

- Obligations of the receiving party outlining what the receiving party is required to do, e.g. such as: Keeping the information secret, Limiting disclosure to authorized personnel, Using the information only for specified purposes

- Exclusions from confidentiality describing information that is not protected under the NDA, such as: Information already known to the receiving party, Publicly available information, Information disclosed by third parties lawfully, Independently developed information

- Specifying any exceptions where disclosure is allowed, such as: To employees or advisors under similar obligations, If required by law or court order (with notice to the disclosing party)

- Term and Duration, defining how long the confidentiality obligation lasts: Often includes both the duration of the agreement and the period during which information remains protected (e.g., “3 years after termination”)

- Purpose of Disclosure (Use Limitation), stating the specific reason the information is being shared (e.g., for evaluating a partnership, conducting due diligence, etc.) and prohibits other uses.

- Remedies for Breach, detailing the consequences of violating the NDA, which may include: Injunctive relief (court orders to stop disclosure), Damages, Legal fees

- Governing Law and Jurisdiction, identifying which country/state’s laws apply and where disputes will be settled.

- Miscellaneous Clauses (Boilerplate), may include: No license granted, Entire agreement clause, Amendment process, Counterparts and signatures

Document type Privacy Policy: A privacy policy is issued by a private or public entity to inform users how their personal data is processed (e.g., collected, used, shared, stored).
If the document is a privacy policy, your summary should align with the following template:

- Personal Data Collected and Processed, specifying what categories of personal data are collected and how. This may include: Name and surname, Contact information, Financial details, Device and browser data, Location information, Inferred preferences or behaviors

- Identity and Contact Details of the Controller, identifying the organisation responsible for the processing. May include: Full legal name of the controller, Contact email or phone number, Details of any representative (if applicable)

- Purposes of Processing, outlining why the personal data is collected and how it will be used. Examples include: Service provision and operation, Personalisation of content or features, Marketing and advertising, Analytics and performance monitoring, Payment processing

- Legal Basis for Processing, specifying the lawful grounds relied upon. These are: Consent of the data subject, Performance of a contract, Compliance with a legal obligation, Protection of vital interests, Task carried out in the public interest, Legitimate interests of the controller or third party

- Recipients of the Data, listing who may receive the data, including: Service providers and processors, Business partners, Public authorities (where legally required), Affiliates and subsidiaries

- International Data Transfers, describing whether personal data is transferred outside the jurisdiction and, if so: Destination countries, Safeguards applied (e.g., Standard Contractual Clauses, adequacy decisions)

- Data Retention, defining how long the personal data will be stored, or the criteria for determining the period. May include: Fixed retention periods, Purpose-based retention (e.g., “as long as necessary to provide the service”), Archiving or deletion policies

- Data Subject Rights, explaining individuals’ rights under data protection law, including: Right to access personal data, Right to rectify inaccuracies, Right to erasure (“right to be forgotten”), Right to restrict or object to processing, Right to data portability

- Right to Lodge a Complaint, providing information on: The data subject’s right to contact a supervisory authority, Name or link to the competent authority

- Automated Decision-Making, disclosing whether such processing occurs and, if so: The logic involved, Potential significance of the decisions, Expected consequences for the data subject

Other document type: If the document does not match the types above, summarize the following general legal document in a structured, concise way. Identify for your summary the important entities, core purpose, and other unique identifiers that differentiate this document from others of the same type.

General Rules:

- The summary must be concise and under {char_length} characters.

- Ignore every field in the template where the information is not present in the document.

- Prioritize extracting the most critical identifiers, such as parties, dates, and the specific subject matter.

- Output ONLY the final summary text!

Here is the document you should summarize:
{document_content}"""

TEMPLATES = {
    "generic": (GENERIC_SYSTEM, GENERIC_USER),
    "expert": (EXPERT_SYSTEM, EXPERT_USER),
}
